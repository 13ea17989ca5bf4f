"""Encoder, heads and parameter storage."""

from .model import AlignmentModel
from .params import ParameterStore

__all__ = ["AlignmentModel", "ParameterStore"]
