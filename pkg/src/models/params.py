"""Named parameter storage and initialization."""

from typing import Dict, Iterator, Mapping

import numpy as np

from src.core.exceptions import CheckpointError, ShapeError
from src.numeric.tensor import Tensor


class ParameterStore:
    """Ordered mapping ``name -> Tensor`` of trainable parameters.

    Weights are drawn from normal(0, ``init_std``), biases start at zero and
    layer-norm gains at one. Creation order is fixed, so one seed gives the
    same parameters every time.
    """

    def __init__(self, rng: np.random.Generator, init_std: float = 0.02):
        self._params: Dict[str, Tensor] = {}
        self._rng = rng
        self.init_std = init_std

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ShapeError(f"parameter {name!r} registered twice")
        tensor = Tensor(data, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def linear(self, name: str, fan_in: int, fan_out: int, bias: bool = True) -> None:
        self.add(f"{name}.w", self._rng.normal(0.0, self.init_std, size=(fan_in, fan_out)))
        if bias:
            self.add(f"{name}.b", np.zeros(fan_out))

    def norm(self, name: str, width: int) -> None:
        self.add(f"{name}.gain", np.ones(width))
        self.add(f"{name}.bias", np.zeros(width))

    def table(self, name: str, rows: int, width: int) -> None:
        self.add(name, self._rng.normal(0.0, self.init_std, size=(rows, width)))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def as_dict(self) -> Dict[str, Tensor]:
        return dict(self._params)

    def count(self) -> int:
        return int(sum(p.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise CheckpointError(
                f"parameter names differ: missing {sorted(missing)[:5]}, unexpected {sorted(extra)[:5]}"
            )
        for name, value in state.items():
            target = self._params[name]
            if tuple(np.shape(value)) != target.shape:
                raise CheckpointError(
                    f"parameter {name!r} has shape {tuple(np.shape(value))}, model expects {target.shape}"
                )
            target.assign(np.asarray(value, dtype=np.float64))
