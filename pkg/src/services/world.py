"""Synthetic scenes and the simulated object detector."""

import logging
from typing import Dict, List, Sequence

import numpy as np

from src.core.exceptions import InvalidInputError, PlacementError
from src.schemas.config import WorldConfig
from src.schemas.world import Box, Detection, Scene, SceneObject
from src.services.alignment_targets import iou
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)

BACKGROUND_BOX: Box = (0.0, 0.0, 1.0, 1.0)
LATENT_NOISE = 0.02


def latent_feature(class_id: int, attribute_id: int, box: Sequence[float], config: WorldConfig) -> np.ndarray:
    """Deterministic visual signature: class one-hot, attribute one-hot, box geometry."""
    num_classes = len(config.classes)
    num_attributes = len(config.attributes)
    needed = num_classes + num_attributes + 7
    if config.feature_dim < needed:
        raise InvalidInputError(f"feature_dim={config.feature_dim} is too small, need at least {needed}")
    x_min, y_min, x_max, y_max = box
    width, height = x_max - x_min, y_max - y_min
    feature = np.zeros(config.feature_dim)
    feature[class_id] = 1.0
    feature[num_classes + attribute_id] = 1.0
    offset = num_classes + num_attributes
    feature[offset:offset + 7] = (x_min, y_min, x_max, y_max, width, height, width * height)
    return feature


def _sample_box(rng: np.random.Generator, config: WorldConfig) -> Box:
    low, high = config.box_size
    width, height = rng.uniform(low, high, size=2)
    x_min = rng.uniform(0.0, 1.0 - width)
    y_min = rng.uniform(0.0, 1.0 - height)
    return (float(x_min), float(y_min), float(x_min + width), float(y_min + height))


def generate_scene(seed: int, config: WorldConfig, scene_id: int = 0) -> Scene:
    """Place ``min_objects..max_objects`` distinct (class, attribute) objects.

    Boxes are rejection-sampled so no two ground-truth boxes overlap by more
    than ``max_iou``; ``max_placement_attempts`` bounds the rejections for the
    whole scene.
    """
    rng = make_rng(seed)
    num_classes = len(config.classes)
    num_attributes = len(config.attributes)
    count = int(rng.integers(config.min_objects, config.max_objects + 1))
    if count > num_classes * num_attributes:
        raise InvalidInputError(f"cannot place {count} distinct objects from {num_classes}x{num_attributes} combinations")
    combos = rng.choice(num_classes * num_attributes, size=count, replace=False)

    boxes: List[Box] = []
    rejections = 0
    while len(boxes) < count:
        candidate = _sample_box(rng, config)
        if all(iou(candidate, placed) <= config.max_iou for placed in boxes):
            boxes.append(candidate)
            continue
        rejections += 1
        if rejections >= config.max_placement_attempts:
            raise PlacementError(
                f"scene {scene_id}: placed {len(boxes)} of {count} objects after {rejections} rejections"
            )

    objects = []
    for combo, box in zip(combos, boxes):
        class_id, attribute_id = divmod(int(combo), num_attributes)
        feature = latent_feature(class_id, attribute_id, box, config) + rng.normal(0.0, LATENT_NOISE, config.feature_dim)
        objects.append(SceneObject(class_id=class_id, attribute_id=attribute_id, box=box, feature=feature.tolist()))
    return Scene(scene_id=scene_id, seed=seed, objects=objects)


def truncated_normal(rng: np.random.Generator, sigma: float, bound: float, size: int) -> np.ndarray:
    """Gaussian draws with entries beyond ``bound * sigma`` redrawn."""
    if sigma <= 0.0:
        return np.zeros(size)
    values = rng.normal(0.0, sigma, size)
    outside = np.abs(values) > bound * sigma
    while outside.any():
        values[outside] = rng.normal(0.0, sigma, int(outside.sum()))
        outside = np.abs(values) > bound * sigma
    return values


def jitter_box(box: Sequence[float], rng: np.random.Generator, sigma: float, bound: float) -> Box:
    """Perturb each coordinate, clamp to the unit square, keep ``box`` if the result is degenerate."""
    moved = np.clip(np.asarray(box, dtype=np.float64) + truncated_normal(rng, sigma, bound, 4), 0.0, 1.0)
    if moved[0] >= moved[2] or moved[1] >= moved[3]:
        return tuple(box)
    return tuple(float(v) for v in moved)


def _confusion_partners(groups: List[List[str]], names: List[str]) -> Dict[int, List[int]]:
    index = {name: i for i, name in enumerate(names)}
    partners: Dict[int, List[int]] = {}
    for group in groups:
        ids = [index[name] for name in group]
        for i in ids:
            partners.setdefault(i, []).extend(j for j in ids if j != i)
    return partners


def _confuse(label: int, probability: float, partners: Dict[int, List[int]], rng: np.random.Generator) -> int:
    draw = rng.random()
    options = partners.get(label)
    if draw < probability and options:
        return int(options[rng.integers(len(options))])
    return label


def background_detection(config: WorldConfig, rng: np.random.Generator) -> Detection:
    feature = np.zeros(config.feature_dim)
    if config.noise.feature_noise > 0:
        feature = rng.normal(0.0, config.noise.feature_noise, config.feature_dim)
    return Detection(
        class_id=len(config.classes),
        attribute_id=len(config.attributes),
        box=BACKGROUND_BOX,
        feature=feature.tolist(),
        background=True,
    )


def simulate_detector(scene: Scene, config: WorldConfig, seed: int) -> List[Detection]:
    """Noisy detector output, padded to ``num_objects`` slots with background.

    Per object: dropped with probability ``noise.drop``; box jittered by a
    truncated gaussian; class and attribute swapped within their confusion
    group with the configured probabilities. The feature keeps the true
    identity but follows the jittered box, plus gaussian noise.
    """
    noise = config.noise
    rng = make_rng(seed)
    class_partners = _confusion_partners(config.class_confusion_groups, [c.name for c in config.classes])
    attribute_partners = _confusion_partners(config.attribute_confusion_groups, [a.name for a in config.attributes])

    detections: List[Detection] = []
    for index, obj in enumerate(scene.objects):
        dropped = rng.random() < noise.drop
        box = jitter_box(obj.box, rng, noise.box_jitter, noise.jitter_bound)
        class_id = _confuse(obj.class_id, noise.class_confusion, class_partners, rng)
        attribute_id = _confuse(obj.attribute_id, noise.attribute_confusion, attribute_partners, rng)
        shift = latent_feature(obj.class_id, obj.attribute_id, box, config) - latent_feature(
            obj.class_id, obj.attribute_id, obj.box, config
        )
        feature = np.asarray(obj.feature) + shift
        if noise.feature_noise > 0:
            feature = feature + rng.normal(0.0, noise.feature_noise, config.feature_dim)
        if dropped:
            continue
        detections.append(
            Detection(
                class_id=class_id,
                attribute_id=attribute_id,
                box=box,
                feature=feature.tolist(),
                source=index,
            )
        )

    if len(detections) > config.num_objects:
        raise InvalidInputError(f"{len(detections)} detections exceed {config.num_objects} slots")
    while len(detections) < config.num_objects:
        detections.append(background_detection(config, rng))
    return detections
