from src.numeric.tensor import ComputationRecord, Tensor, backward, concat, dot, matmul, stack, where

__all__ = ["ComputationRecord", "Tensor", "backward", "concat", "dot", "matmul", "stack", "where"]
