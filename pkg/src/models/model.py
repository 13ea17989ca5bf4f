"""Encoder plus heads as one parameterized model."""

import logging
from typing import Optional

import numpy as np

from src.models.encoder import EncoderInputs, EncoderOutput, encode, init_encoder_params
from src.models.heads import init_head_params
from src.models.params import ParameterStore
from src.schemas.config import ModelConfig

logger = logging.getLogger(__name__)


class AlignmentModel:
    """Vision-language encoder with masking, matching, VQA, pair and alignment heads."""

    def __init__(self, config: ModelConfig, params: ParameterStore):
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int) -> "AlignmentModel":
        store = ParameterStore(np.random.default_rng(seed), init_std=config.init_std)
        init_encoder_params(store, config)
        init_head_params(store, config)
        logger.info(f"Initialized model with {store.count():,} parameters (d={config.d}, H={config.heads})")
        return cls(config, store)

    def encode(self, inputs: EncoderInputs, rng: Optional[np.random.Generator] = None) -> EncoderOutput:
        return encode(inputs, self.params, self.config, rng)
