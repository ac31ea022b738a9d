"""
Models for exponential mixtures, compress-and-forward quantization and the
combined DF/CF protocol.
"""
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator, validator

WEIGHT_TOLERANCE = 1e-12


class MixtureComponent(BaseModel):
    weight: float = Field(..., ge=0.0, le=1.0)
    variance: float = Field(..., gt=0.0)


class MixtureSpec(BaseModel):
    """Weighted mixture of exponential power densities with variances sigma_j^2."""
    components: List[MixtureComponent] = Field(..., min_length=1)

    @validator('components')
    def validate_weights(cls, v):
        total = math.fsum(c.weight for c in v)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"Mixture weights must sum to 1 (got {total:.15f})")
        return v

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, float]]) -> "MixtureSpec":
        """Build from (weight, variance) pairs."""
        return cls(components=[MixtureComponent(weight=w, variance=s) for w, s in pairs])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=float)

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.variance for c in self.components], dtype=float)


class QuantizationParams(BaseModel):
    """Quantization noise variance of relays 1..N; +inf switches a relay's description off."""
    nhat: List[float] = Field(default_factory=list)

    @validator('nhat', each_item=True)
    def validate_nhat(cls, v):
        if math.isnan(v) or v < 0:
            raise ValueError('Quantization noise variances must be non-negative')
        return v

    def of(self, relay: int) -> float:
        return self.nhat[relay - 1]

    @property
    def active_relays(self) -> List[int]:
        return [j for j, n in enumerate(self.nhat, start=1) if math.isfinite(n)]

    @classmethod
    def switched_off(cls, num_relays: int) -> "QuantizationParams":
        return cls(nhat=[math.inf] * num_relays)


class CovMatrix(BaseModel):
    """Covariance of the destination output and quantized relay outputs."""
    labels: List[str] = Field(..., description="Row labels, destination first")
    entries: List[List[float]]

    @model_validator(mode='after')
    def validate_symmetric(self):
        n = len(self.labels)
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise ValueError(f"Covariance matrix must be {n}x{n}")
        arr = np.asarray(self.entries, dtype=float)
        if not np.allclose(arr, arr.T, rtol=1e-12, atol=1e-12):
            raise ValueError("Covariance matrix must be symmetric")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)


class CombinedParams(BaseModel):
    """Parameters of the alternating two-relay protocol (relay 1 DF, relay 2 CF)."""
    p1: float = Field(..., ge=0.0, le=1.0, description="Share of phase 1 (relay 2 transmits)")
    p2: float = Field(..., ge=0.0, le=1.0, description="Share of phase 2 (relay 1 transmits)")
    nu_s_s1: float = Field(default=1.0, ge=0.0, le=1.0, description="Source share on its phase-1 message")
    nu_s_s2: float = Field(default=0.5, ge=0.0, le=1.0, description="Source share on its phase-2 fresh message")
    nu_s_11: float = Field(default=0.5, ge=0.0, le=1.0, description="Source share supporting relay 1's message")
    nu_1_11: float = Field(default=1.0, ge=0.0, le=1.0, description="Relay 1 share on its own message")
    omega_2: float = Field(default=1.0, ge=0.0, le=1.0, description="Relay 2 broadcast share")
    decode_interference: bool = Field(default=False, description="Relay 1 decodes relay 2's broadcast")
    nhat_2: Optional[float] = Field(default=None, ge=0.0, description="Quantization noise; None pins it to the lower bound")

    @model_validator(mode='after')
    def validate_shares(self):
        if abs(self.p1 + self.p2 - 1.0) > 1e-9:
            raise ValueError(f"Phase shares must sum to 1 (got {self.p1 + self.p2:.12f})")
        if self.nu_s_s2 + self.nu_s_11 > 1.0 + 1e-9:
            raise ValueError("Source phase-2 power fractions sum to more than 1")
        return self


class QuantizationBound(NamedTuple):
    """Broadcast rates of the combined protocol's CF relay and the resulting noise floor."""
    rhat_destination: float
    rhat_relay: Optional[float]
    nhat_lower: float
