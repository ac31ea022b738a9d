"""
Search-space models for derivative-free rate maximization.
"""
from enum import Enum
from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, Field, model_validator


class ConstraintKind(str, Enum):
    """Constraint type of a parameter block."""
    SIMPLEX = "simplex"
    BOX = "box"
    SUM_CAPPED = "sum_capped"


class ParameterBlock(BaseModel):
    """
    A contiguous group of search coordinates.

    SIMPLEX blocks are probability vectors, BOX blocks are clipped to
    [lower, upper], SUM_CAPPED blocks are clipped to [0, 1] and scaled down
    when their sum exceeds 1.
    """
    name: str
    size: int = Field(..., ge=1)
    kind: ConstraintKind = ConstraintKind.BOX
    lower: float = Field(default=0.0)
    upper: float = Field(default=1.0)

    @model_validator(mode='after')
    def validate_bounds(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError(f"Bounds of block '{self.name}' must be finite")
        if self.upper < self.lower:
            raise ValueError(f"Block '{self.name}' has upper bound below lower bound")
        return self

    def project(self, values: np.ndarray) -> np.ndarray:
        """Map raw coordinates onto the feasible set of this block."""
        if self.kind == ConstraintKind.SIMPLEX:
            clipped = np.clip(values, 0.0, None)
            total = clipped.sum()
            if total <= 0.0:
                return np.full(self.size, 1.0 / self.size)
            return clipped / total
        if self.kind == ConstraintKind.SUM_CAPPED:
            clipped = np.clip(values, 0.0, 1.0)
            total = clipped.sum()
            return clipped / total if total > 1.0 else clipped
        return np.clip(values, self.lower, self.upper)

    def scale(self, unit: np.ndarray) -> np.ndarray:
        """Map start coordinates from [0, 1] into the block's range."""
        if self.kind == ConstraintKind.BOX:
            return self.lower + unit * (self.upper - self.lower)
        return unit


class SearchSpec(BaseModel):
    """Continuous search dimensions, discrete branches and evaluation budget."""
    protocol: str = Field(default="objective", description="Label used in logs")
    blocks: List[ParameterBlock] = Field(default_factory=list)
    branches: List[Any] = Field(default_factory=lambda: [None], min_length=1)
    budget: int = Field(default=4000, gt=0, description="Maximum objective evaluations per branch")
    seed: int = Field(default=0)
    tolerance: float = Field(default=1e-9, ge=0.0, description="Relative improvement floor of a refinement")
    refine_chunk: int = Field(default=200, ge=10, description="Evaluations per Nelder-Mead refinement")
    max_starts: int = Field(default=243, ge=1)
    warm_starts: List[List[float]] = Field(default_factory=list, description="Raw points evaluated before the start grid")

    @model_validator(mode='after')
    def validate_warm_starts(self):
        for point in self.warm_starts:
            if len(point) != self.dimension:
                raise ValueError(f"Warm start has {len(point)} coordinates, expected {self.dimension}")
        return self

    @property
    def dimension(self) -> int:
        return sum(b.size for b in self.blocks)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Project a full raw vector block by block."""
        parts = []
        offset = 0
        for block in self.blocks:
            parts.append(block.project(np.asarray(x[offset:offset + block.size], dtype=float)))
            offset += block.size
        return np.concatenate(parts) if parts else np.zeros(0)

    def split(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        """Split a projected vector into named blocks."""
        out = {}
        offset = 0
        for block in self.blocks:
            out[block.name] = np.asarray(x[offset:offset + block.size], dtype=float)
            offset += block.size
        return out


class OptimizationResult(BaseModel):
    """Best point found by a search."""
    rate: float
    params: List[float] = Field(default_factory=list)
    branch: Any = None
    evaluations: int = Field(default=0, ge=0)
    starts: int = Field(default=0, ge=0)
    refinements: int = Field(default=0, ge=0)
