"""Closed vocabulary, sentence templates and the question oracle."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import ConfigError, TemplateError, UnknownNameError
from src.schemas.config import WorldConfig
from src.schemas.world import (
    BACKGROUND_CLASS,
    CLS_ID,
    NO_ATTRIBUTE,
    SPECIAL_TOKENS,
    GroundedSpan,
    Scene,
    SceneObject,
    SceneView,
    UtteranceRecord,
)
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)

FUNCTION_WORDS = (
    "the", "and", "a", "what", "shape", "color", "is", "thing", "things", "left", "right", "of",
    "there", "how", "many", "are", "both", "images", "have", "one", "image", "has",
)
YES, NO = "yes", "no"
MAX_COUNT = 4
MAX_TEMPLATE_ATTEMPTS = 20

CAPTION = "caption"
QUESTION = "question"
PAIR = "pair"


class Language:
    """Token ids, surface words and answer labels for one world configuration."""

    def __init__(self, config: WorldConfig):
        self.config = config
        self.class_names = [c.name for c in config.classes] + [BACKGROUND_CLASS]
        self.attribute_names = [a.name for a in config.attributes] + [NO_ATTRIBUTE]
        self.synonyms: Dict[str, List[str]] = {}
        for entry in list(config.classes) + list(config.attributes):
            self.synonyms[entry.name] = [entry.name] + list(entry.synonyms)

        self.vocab: List[str] = list(SPECIAL_TOKENS) + list(FUNCTION_WORDS)
        for forms in self.synonyms.values():
            self.vocab.extend(forms)
        if len(set(self.vocab)) != len(self.vocab):
            raise ConfigError("class, attribute and synonym words must be distinct from each other and from function words")
        self.token_ids = {word: i for i, word in enumerate(self.vocab)}

        self.answers: List[str] = (
            [a.name for a in config.attributes]
            + [c.name for c in config.classes]
            + [YES, NO]
            + [str(n) for n in range(MAX_COUNT + 1)]
        )

    def clusters(self) -> Dict[str, List[str]]:
        """Synonym clusters for the embedding table: one per name, singletons for the rest."""
        clusters = {word: [word] for word in FUNCTION_WORDS}
        clusters.update({name: list(forms) for name, forms in self.synonyms.items()})
        clusters[BACKGROUND_CLASS] = [BACKGROUND_CLASS]
        clusters[NO_ATTRIBUTE] = [NO_ATTRIBUTE]
        return clusters

    def encode(self, words: Sequence[str]) -> List[int]:
        """Token ids with [CLS] prepended."""
        ids = [CLS_ID]
        for word in words:
            if word not in self.token_ids:
                raise UnknownNameError(f"word {word!r} is not in the vocabulary")
            ids.append(self.token_ids[word])
        return ids

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.vocab[i] for i in ids]

    def answer_id(self, answer: str) -> int:
        try:
            return self.answers.index(answer)
        except ValueError:
            raise UnknownNameError(f"{answer!r} is not an answer label")

    def surface(self, name: str, rng: np.random.Generator) -> str:
        """``name`` or, with probability ``synonym_rate``, one of its synonyms."""
        forms = self.synonyms[name]
        if len(forms) > 1 and rng.random() < self.config.synonym_rate:
            return forms[1 + int(rng.integers(len(forms) - 1))]
        return name

    def class_name(self, obj: SceneObject) -> str:
        return self.class_names[obj.class_id]

    def attribute_name(self, obj: SceneObject) -> str:
        return self.attribute_names[obj.attribute_id]


# ----------------------------------------------------------------------
# question programs
# ----------------------------------------------------------------------
@dataclass
class QuestionProgram:
    """Structured form of a question, evaluated against a ground-truth scene."""

    op: str
    args: Tuple = ()


def _center_x(obj: SceneObject) -> float:
    return (obj.box[0] + obj.box[2]) / 2.0


def evaluate_question(program: QuestionProgram, scene: Scene, language: Language) -> str:
    """Answer ``program`` on ``scene``; raises TemplateError when it is ill-posed."""
    objects = scene.objects

    def unique(predicate: Callable[[SceneObject], bool]) -> SceneObject:
        matches = [o for o in objects if predicate(o)]
        if len(matches) != 1:
            raise TemplateError(f"{program.op} refers to {len(matches)} objects")
        return matches[0]

    if program.op == "shape_of_attribute":
        (attribute_id,) = program.args
        return language.class_name(unique(lambda o: o.attribute_id == attribute_id))
    if program.op == "color_of_class":
        (class_id,) = program.args
        return language.attribute_name(unique(lambda o: o.class_id == class_id))
    if program.op == "color_of_class_relation":
        class_id, relation, other_id = program.args
        anchor = unique(lambda o: o.class_id == other_id)
        if relation == "left":
            target = unique(lambda o: o.class_id == class_id and _center_x(o) < _center_x(anchor))
        else:
            target = unique(lambda o: o.class_id == class_id and _center_x(o) > _center_x(anchor))
        return language.attribute_name(target)
    if program.op == "exists":
        attribute_id, class_id = program.args
        found = any(o.attribute_id == attribute_id and o.class_id == class_id for o in objects)
        return YES if found else NO
    if program.op == "count_attribute":
        (attribute_id,) = program.args
        count = sum(1 for o in objects if o.attribute_id == attribute_id)
        if count > MAX_COUNT:
            raise TemplateError(f"count {count} exceeds the answer range")
        return str(count)
    raise TemplateError(f"unknown question op {program.op!r}")


# ----------------------------------------------------------------------
# templates
# ----------------------------------------------------------------------
@dataclass
class Draft:
    """Sentence under construction. Span positions count [CLS] as position 0."""

    words: List[str] = field(default_factory=list)
    spans: List[Tuple[int, int, int]] = field(default_factory=list)  # (start, end, object index)
    program: Optional[QuestionProgram] = None
    label: Optional[bool] = None

    def add(self, *words: str) -> None:
        self.words.extend(words)

    def add_span(self, object_index: int, *words: str) -> None:
        start = len(self.words) + 1
        self.words.extend(words)
        self.spans.append((start, start + len(words), object_index))


def _unique_by(objects: List[SceneObject], key: Callable[[SceneObject], int]) -> List[int]:
    values = [key(o) for o in objects]
    return [i for i, v in enumerate(values) if values.count(v) == 1]


def caption_template(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    """"the red square and the blue circle": one to three described objects."""
    objects = scene.objects
    count = int(rng.integers(1, min(3, len(objects)) + 1))
    draft = Draft()
    for n, index in enumerate(rng.choice(len(objects), size=count, replace=False)):
        obj = objects[int(index)]
        if n:
            draft.add("and")
        draft.add("the")
        draft.add_span(int(index), lang.surface(lang.attribute_name(obj), rng), lang.surface(lang.class_name(obj), rng))
    return draft


def shape_question(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    candidates = _unique_by(scene.objects, lambda o: o.attribute_id)
    if not candidates:
        return None
    index = candidates[int(rng.integers(len(candidates)))]
    obj = scene.objects[index]
    draft = Draft(program=QuestionProgram("shape_of_attribute", (obj.attribute_id,)))
    draft.add("what", "shape", "is", "the")
    draft.add_span(index, lang.surface(lang.attribute_name(obj), rng), "thing")
    return draft


def color_question(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    candidates = _unique_by(scene.objects, lambda o: o.class_id)
    if not candidates:
        return None
    index = candidates[int(rng.integers(len(candidates)))]
    obj = scene.objects[index]
    draft = Draft(program=QuestionProgram("color_of_class", (obj.class_id,)))
    draft.add("what", "color", "is", "the")
    draft.add_span(index, lang.surface(lang.class_name(obj), rng))
    return draft


def relation_question(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    """"what color is the square left of the circle"."""
    candidates = _unique_by(scene.objects, lambda o: o.class_id)
    if len(candidates) < 2:
        return None
    first, second = (candidates[int(i)] for i in rng.choice(len(candidates), size=2, replace=False))
    target, anchor = scene.objects[first], scene.objects[second]
    if _center_x(target) == _center_x(anchor):
        return None
    relation = "left" if _center_x(target) < _center_x(anchor) else "right"
    draft = Draft(program=QuestionProgram("color_of_class_relation", (target.class_id, relation, anchor.class_id)))
    draft.add("what", "color", "is", "the")
    draft.add_span(first, lang.surface(lang.class_name(target), rng))
    draft.add(relation, "of", "the")
    draft.add_span(second, lang.surface(lang.class_name(anchor), rng))
    return draft


def exists_question(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    """"is there a red square", answered yes and no equally often.

    A "no" question has no referent, so this template only feeds unannotated records.
    """
    objects = scene.objects
    if rng.random() < 0.5:
        obj = objects[int(rng.integers(len(objects)))]
        attribute_id, class_id = obj.attribute_id, obj.class_id
    else:
        present = {(o.attribute_id, o.class_id) for o in objects}
        absent = [
            (a, c)
            for a in range(len(lang.config.attributes))
            for c in range(len(lang.config.classes))
            if (a, c) not in present
        ]
        if not absent:
            return None
        attribute_id, class_id = absent[int(rng.integers(len(absent)))]

    draft = Draft(program=QuestionProgram("exists", (attribute_id, class_id)))
    draft.add("is", "there", "a")
    draft.add(lang.surface(lang.attribute_names[attribute_id], rng), lang.surface(lang.class_names[class_id], rng))
    return draft


def count_question(scene: Scene, lang: Language, rng: np.random.Generator) -> Optional[Draft]:
    attribute_id = int(rng.integers(len(lang.config.attributes)))
    if sum(1 for o in scene.objects if o.attribute_id == attribute_id) > MAX_COUNT:
        return None
    draft = Draft(program=QuestionProgram("count_attribute", (attribute_id,)))
    draft.add("how", "many", lang.surface(lang.attribute_names[attribute_id], rng), "things", "are", "there")
    return draft


def pair_statement(scenes: Sequence[Scene], lang: Language, rng: np.random.Generator) -> Draft:
    """"both images have a red square" / "one image has a red square" with its truth value."""
    source = scenes[int(rng.integers(2))]
    obj = source.objects[int(rng.integers(len(source.objects)))]
    contains = [
        any(o.class_id == obj.class_id and o.attribute_id == obj.attribute_id for o in scene.objects)
        for scene in scenes
    ]
    draft = Draft()
    if rng.random() < 0.5:
        draft.add("both", "images", "have", "a")
        draft.label = all(contains)
    else:
        draft.add("one", "image", "has", "a")
        draft.label = contains[0] != contains[1]
    draft.add(lang.surface(lang.attribute_name(obj), rng), lang.surface(lang.class_name(obj), rng))
    return draft


QUESTION_TEMPLATES = (shape_question, color_question, relation_question, exists_question, count_question)
# questions whose phrases point at an object present in the scene
GROUNDED_QUESTION_TEMPLATES = (shape_question, color_question, relation_question)


def _fill_template(
    kind: str, scenes: Sequence[Scene], language: Language, rng: np.random.Generator, annotate: bool
) -> Optional[Draft]:
    templates = GROUNDED_QUESTION_TEMPLATES if annotate else QUESTION_TEMPLATES
    for _ in range(MAX_TEMPLATE_ATTEMPTS):
        if kind == CAPTION:
            draft = caption_template(scenes[0], language, rng)
        elif kind == QUESTION:
            draft = templates[int(rng.integers(len(templates)))](scenes[0], language, rng)
        else:
            draft = pair_statement(scenes, language, rng)
        if draft is None or len(draft.words) + 1 > language.config.max_tokens:
            continue
        if annotate and kind != PAIR and not draft.spans:
            continue
        return draft
    return None


def generate_utterance(
    views: Sequence[SceneView],
    kind: str,
    seed: int,
    language: Language,
    annotate: bool = True,
    record_id: int = 0,
    split: str = "train",
) -> UtteranceRecord:
    """Fill a template of ``kind`` against the scene(s) in ``views``.

    Spans point at ground-truth boxes. Unannotated records keep the sentence
    but drop its spans. Templates that do not fit the scene are redrawn up to
    ``MAX_TEMPLATE_ATTEMPTS`` times.
    """
    rng = make_rng(seed)
    scenes = [view.scene for view in views]
    if kind == PAIR and len(scenes) != 2:
        raise TemplateError("pair statements need exactly two scenes")
    if kind != PAIR and len(scenes) != 1:
        raise TemplateError(f"{kind} records describe exactly one scene")

    if kind not in (CAPTION, QUESTION, PAIR):
        raise TemplateError(f"unknown utterance kind {kind!r}")

    draft = _fill_template(kind, scenes, language, rng, annotate)
    if draft is None and annotate and kind == QUESTION:
        # every object shares its class and its attribute with another one
        logger.debug(f"no grounded question fits scene {scenes[0].scene_id}, writing it unannotated")
        annotate = False
        draft = _fill_template(kind, scenes, language, rng, annotate)
    if draft is None:
        raise TemplateError(f"no {kind} template fits scene {scenes[0].scene_id} after {MAX_TEMPLATE_ATTEMPTS} attempts")

    answer = None
    if draft.program is not None:
        answer = language.answer_id(evaluate_question(draft.program, scenes[0], language))

    spans = []
    if annotate and kind != PAIR:
        spans = [
            GroundedSpan(start=start, end=end, box=scenes[0].objects[index].box, object_index=index)
            for start, end, index in draft.spans
        ]

    return UtteranceRecord(
        record_id=record_id,
        split=split,
        kind=kind,
        text=" ".join(draft.words),
        tokens=language.encode(draft.words),
        spans=spans,
        answer=answer,
        label=draft.label,
        views=list(views),
    )
