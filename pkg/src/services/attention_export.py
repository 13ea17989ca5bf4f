"""Word x object cross-attention export (CSV matrices plus a JSON sidecar)."""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.core.exceptions import ExportError
from src.models.encoder import CROSS_LANG_FROM_VISION
from src.models.heads import vqa_logits
from src.models.model import AlignmentModel
from src.schemas.export import AttentionSidecar, ObjectDescriptor
from src.schemas.world import DatasetHeader, SceneView, UtteranceRecord
from src.services.batching import example_from_view, stack_examples

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"


def read_attention_csv(path: Union[str, Path]) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


class AttentionExporter:
    """Encodes one record and writes its word-to-object attention maps at a chosen cross-modality layer.

    Rows are the record's real tokens ([CLS] included), columns are detector
    slots. Pair records are encoded against their first scene.
    """

    def __init__(self, model: AlignmentModel, header: DatasetHeader):
        self.model = model
        self.header = header

    def check_layer(self, layer: int) -> int:
        last = self.model.config.cross_layers - 1
        if not 0 <= layer <= last:
            raise ExportError(f"layer {layer} is out of range; valid layers are 0..{last}")
        return layer

    def attention(self, record: UtteranceRecord, layer: int) -> Tuple[np.ndarray, str]:
        """Per-head maps of shape (H, n_tokens, O) and the answer predicted from [CLS]."""
        self.check_layer(layer)
        output = self.model.encode(self._inputs(record))
        alpha = output.traces[CROSS_LANG_FROM_VISION][layer][0]
        logits = vqa_logits(output.cls, self.model.params, self.model.config.layer_norm_eps).data[0]
        return alpha[:, : len(record.tokens), :], self.header.answers[int(np.argmax(logits))]

    def export(
        self,
        record: UtteranceRecord,
        layer: int,
        out_dir: Union[str, Path],
        sum_heads: bool = False,
    ) -> AttentionSidecar:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        alpha, predicted = self.attention(record, layer)

        files: List[str] = []
        if sum_heads:
            name = f"attention_L{layer}_sum.csv"
            np.savetxt(out_dir / name, alpha.sum(axis=0), fmt=CSV_FORMAT, delimiter=",")
            files.append(name)
        else:
            for head in range(alpha.shape[0]):
                name = f"attention_L{layer}_h{head}.csv"
                np.savetxt(out_dir / name, alpha[head], fmt=CSV_FORMAT, delimiter=",")
                files.append(name)

        sidecar = AttentionSidecar(
            record_id=record.record_id,
            kind=record.kind,
            text=record.text,
            tokens=[self.header.vocab[t] for t in record.tokens],
            objects=self._describe(record.views[0]),
            layer=layer,
            heads=int(alpha.shape[0]),
            sum_heads=sum_heads,
            files=files,
            predicted_answer=predicted,
            answer=self._answer(record),
        )
        (out_dir / f"attention_L{layer}.json").write_text(sidecar.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"📊 Exported layer {layer} attention for record {record.record_id} to {out_dir} ({len(files)} files)")
        return sidecar

    def _inputs(self, record: UtteranceRecord):
        example = example_from_view(record.tokens, record.views[0], self.model.config.max_tokens)
        return stack_examples([example])

    def _describe(self, view: SceneView) -> List[ObjectDescriptor]:
        return [
            ObjectDescriptor(
                slot=slot,
                class_name=self.header.class_names[d.class_id],
                attribute=self.header.attribute_names[d.attribute_id],
                box=d.box,
                background=d.background,
                source=d.source,
            )
            for slot, d in enumerate(view.detections)
        ]

    def _answer(self, record: UtteranceRecord) -> Optional[str]:
        if record.answer is None:
            return None
        return self.header.answers[record.answer]


def find_record(records: List[UtteranceRecord], record_id: int) -> UtteranceRecord:
    for record in records:
        if record.record_id == record_id:
            return record
    raise ExportError(f"record {record_id} not found in the dataset")
