"""Central finite-difference verification of analytic gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from src.numeric.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """Per-parameter max error between analytic and numeric gradients."""

    tolerance: float
    errors: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def worst(self) -> Optional[str]:
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.get)


def compare(analytic: float, numeric: float, abs_floor: float = 1e-8) -> float:
    """Relative error, falling back to absolute error when both are tiny."""
    scale = max(abs(analytic), abs(numeric))
    diff = abs(analytic - numeric)
    if scale < abs_floor:
        return diff
    return diff / scale


def grad_check(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    abs_floor: float = 1e-8,
) -> GradCheckReport:
    """Check ``fn``'s gradient w.r.t. ``params`` by central differences.

    ``fn`` must be deterministic and return a scalar tensor built from the
    current values of ``params``. ``max_coords`` samples that many coordinates
    per parameter (all of them when ``None``).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for p in params.values():
        p.zero_grad()
    fn().backward()
    analytic = {name: np.array(p.grad) for name, p in params.items()}

    report = GradCheckReport(tolerance=tolerance)
    for name, param in params.items():
        original = np.array(param.data)
        flat_size = original.size
        if max_coords is None or max_coords >= flat_size:
            coords = np.arange(flat_size)
        else:
            coords = np.sort(rng.choice(flat_size, size=max_coords, replace=False))

        worst = 0.0
        try:
            for c in coords:
                bumped = original.reshape(-1).copy()
                bumped[c] = original.reshape(-1)[c] + h
                param.assign(bumped.reshape(original.shape))
                f_plus = fn().item()
                bumped[c] = original.reshape(-1)[c] - h
                param.assign(bumped.reshape(original.shape))
                f_minus = fn().item()
                numeric = (f_plus - f_minus) / (2.0 * h)
                worst = max(worst, compare(float(analytic[name].reshape(-1)[c]), numeric, abs_floor))
        finally:
            param.assign(original)

        report.errors[name] = worst
        report.checked[name] = len(coords)
        logger.debug(f"grad_check {name}: {len(coords)} coords, max err {worst:.3e}")

    if not report.passed:
        logger.warning(f"⚠️ grad_check failed: {report.worst()} error {report.max_error:.3e}")
    return report
