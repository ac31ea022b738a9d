"""
Network, schedule and power-allocation models for half-duplex relay networks.

Node indices: source 0, relays 1..N, destination N+1.
"""
import itertools
import math
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator, validator

DISTANCE_FLOOR = 1e-3
PMF_TOLERANCE = 1e-12
SHARE_TOLERANCE = 1e-9


class NodeState(str, Enum):
    """Half-duplex node state."""
    LISTEN = "L"
    TRANSMIT = "T"


class CombiningMode(str, Enum):
    """How co-senders of one message combine at a receiver."""
    COHERENT = "coherent"
    NON_COHERENT = "noncoherent"


class KnowledgeMode(str, Enum):
    """Whether node states are a known schedule or drawn at random."""
    FIXED_SCHEDULE = "fixed"
    RANDOM_ACCESS = "random"


def db_to_linear(value_db: float) -> float:
    """Convert a dB figure to a linear power ratio."""
    return 10.0 ** (value_db / 10.0)


class NetworkConfig(BaseModel):
    """Geometry, path loss and per-node powers of a relay network."""
    num_relays: int = Field(..., ge=0, le=8, description="Number of relays N")
    distance: List[List[float]] = Field(..., description="Symmetric (N+2)x(N+2) normalized distances")
    path_loss_exponent: float = Field(default=4.0, gt=0.0, description="Path loss exponent theta")
    tx_power: List[float] = Field(..., description="Linear transmit power of nodes 0..N")
    noise_power: List[float] = Field(..., description="Linear noise power at receivers 1..N+1")
    combining: CombiningMode = Field(default=CombiningMode.NON_COHERENT)
    relay_order: Optional[List[int]] = Field(
        default=None,
        description="Decoding order of the relays as a permutation of 1..N (identity if omitted)"
    )

    @validator('tx_power', each_item=True)
    def validate_tx_power(cls, v):
        """Transmit powers may be zero (silent node) but never negative."""
        if v < 0:
            raise ValueError('Transmit powers must be non-negative')
        return v

    @validator('noise_power', each_item=True)
    def validate_noise_power(cls, v):
        if v <= 0:
            raise ValueError('Noise powers must be positive')
        return v

    @model_validator(mode='after')
    def validate_shapes(self):
        n_nodes = self.num_relays + 2
        if len(self.distance) != n_nodes or any(len(row) != n_nodes for row in self.distance):
            raise ValueError(f"Distance matrix must be {n_nodes}x{n_nodes}")
        for i in range(n_nodes):
            if self.distance[i][i] != 0.0:
                raise ValueError(f"Distance matrix diagonal must be zero (node {i})")
            for j in range(i + 1, n_nodes):
                d_ij, d_ji = self.distance[i][j], self.distance[j][i]
                if not math.isclose(d_ij, d_ji, rel_tol=1e-12, abs_tol=0.0):
                    raise ValueError(f"Distance matrix must be symmetric (nodes {i}, {j})")
                if d_ij <= 0:
                    raise ValueError(f"Distance between nodes {i} and {j} must be positive")
        if len(self.tx_power) != self.num_relays + 1:
            raise ValueError(f"Expected {self.num_relays + 1} transmit powers, got {len(self.tx_power)}")
        if len(self.noise_power) != self.num_relays + 1:
            raise ValueError(f"Expected {self.num_relays + 1} noise powers, got {len(self.noise_power)}")
        if self.relay_order is not None and sorted(self.relay_order) != list(range(1, self.num_relays + 1)):
            raise ValueError(f"relay_order must be a permutation of 1..{self.num_relays}")
        return self

    @property
    def destination(self) -> int:
        return self.num_relays + 1

    @property
    def num_nodes(self) -> int:
        return self.num_relays + 2

    def noise(self, receiver: int) -> float:
        """Noise power at receiver 1..N+1."""
        return self.noise_power[receiver - 1]

    def ordered(self) -> "NetworkConfig":
        """
        Renumber the relays so that relay_order becomes the identity.

        Protocol code always works on the renumbered network, so relay j is
        the j-th relay in decoding order.
        """
        if self.relay_order is None or self.relay_order == list(range(1, self.num_relays + 1)):
            return self
        perm = [0] + list(self.relay_order) + [self.destination]
        distance = [[self.distance[perm[i]][perm[j]] for j in range(self.num_nodes)] for i in range(self.num_nodes)]
        tx_power = [self.tx_power[perm[i]] for i in range(self.num_relays + 1)]
        noise_power = [self.noise_power[perm[l] - 1] for l in range(1, self.num_nodes)]
        return NetworkConfig(
            num_relays=self.num_relays,
            distance=distance,
            path_loss_exponent=self.path_loss_exponent,
            tx_power=tx_power,
            noise_power=noise_power,
            combining=self.combining,
        )

    def with_relay_order(self, order: Optional[Sequence[int]]) -> "NetworkConfig":
        data = self.model_dump()
        data["relay_order"] = list(order) if order is not None else None
        return NetworkConfig(**data)

    def with_source_power(self, power: float) -> "NetworkConfig":
        data = self.model_dump()
        data["tx_power"] = [power] + list(self.tx_power[1:])
        return NetworkConfig(**data)

    def without_relays(self) -> "NetworkConfig":
        """Single-hop network keeping only the source and destination."""
        d = self.destination
        return NetworkConfig(
            num_relays=0,
            distance=[[0.0, self.distance[0][d]], [self.distance[d][0], 0.0]],
            path_loss_exponent=self.path_loss_exponent,
            tx_power=[self.tx_power[0]],
            noise_power=[self.noise(d)],
            combining=self.combining,
        )

    @classmethod
    def from_positions(
        cls,
        positions: Sequence[float],
        snr_db: float = 10.0,
        path_loss_exponent: float = 4.0,
        combining: CombiningMode = CombiningMode.NON_COHERENT,
    ) -> "NetworkConfig":
        """
        Build a network from 1-D node positions [source, relays..., destination].

        All nodes get the power P = 10^(snr_db/10) and unit noise, so
        SNR_{s,d} = P/N_d when the source-destination distance is 1.
        Pairwise distances below DISTANCE_FLOOR are clamped to it.

        Args:
            positions: Positions of nodes 0..N+1 on a line
            snr_db: Source-to-destination SNR in dB at unit distance
            path_loss_exponent: Path loss exponent theta
            combining: Combining mode of co-senders

        Returns:
            NetworkConfig
        """
        if len(positions) < 2:
            raise ValueError("At least a source and a destination position are required")
        n_nodes = len(positions)
        distance = [
            [0.0 if i == j else max(abs(positions[i] - positions[j]), DISTANCE_FLOOR) for j in range(n_nodes)]
            for i in range(n_nodes)
        ]
        power = db_to_linear(snr_db)
        return cls(
            num_relays=n_nodes - 2,
            distance=distance,
            path_loss_exponent=path_loss_exponent,
            tx_power=[power] * (n_nodes - 1),
            noise_power=[1.0] * (n_nodes - 1),
            combining=combining,
        )

    @classmethod
    def two_relay_line(cls, r: float, **kwargs) -> "NetworkConfig":
        """Relay 1 at r, relay 2 at 1-r between source 0 and destination 1."""
        return cls.from_positions([0.0, r, 1.0 - r, 1.0], **kwargs)

    @classmethod
    def single_relay_line(cls, r: float, **kwargs) -> "NetworkConfig":
        return cls.from_positions([0.0, r, 1.0], **kwargs)

    @classmethod
    def equally_spaced(cls, num_relays: int, **kwargs) -> "NetworkConfig":
        """N relays at i/(N+1) for i in 1..N."""
        return cls.from_positions([i / (num_relays + 1) for i in range(num_relays + 2)], **kwargs)


class StateVector(BaseModel):
    """Listen/transmit state of nodes 0..N."""
    modes: Tuple[NodeState, ...]

    class Config:
        frozen = True

    @classmethod
    def from_code(cls, code: str) -> "StateVector":
        """Parse a code such as 'TLT' (source transmits, relay 1 listens, relay 2 transmits)."""
        try:
            return cls(modes=tuple(NodeState(c) for c in code))
        except ValueError:
            raise ValueError(f"Invalid state code '{code}': use only 'L' and 'T'")

    @property
    def code(self) -> str:
        return "".join(m.value for m in self.modes)

    def transmits(self, node: int) -> bool:
        """True when node transmits; the destination (index N+1) always listens."""
        return node < len(self.modes) and self.modes[node] == NodeState.TRANSMIT

    def listens(self, node: int) -> bool:
        return not self.transmits(node)

    @property
    def transmitter_count(self) -> int:
        return sum(1 for m in self.modes if m == NodeState.TRANSMIT)

    def __len__(self) -> int:
        return len(self.modes)


def all_state_codes(num_relays: int) -> List[str]:
    """Every state code of nodes 0..N in a fixed order."""
    return ["".join(c) for c in itertools.product("LT", repeat=num_relays + 1)]


def max_transmitters(num_relays: int, reuse_factor: int) -> int:
    """Largest number of simultaneous transmitters allowed with reuse factor 1/k."""
    return (num_relays + 1) // reuse_factor


class StateDistribution(BaseModel):
    """Probability mass over joint node states."""
    num_relays: int = Field(..., ge=0)
    pmf: Dict[str, float] = Field(..., description="State code -> probability")
    knowledge_mode: KnowledgeMode = Field(default=KnowledgeMode.FIXED_SCHEDULE)
    reuse_factor: Optional[int] = Field(default=None, ge=1)

    @validator('pmf')
    def validate_probabilities(cls, v):
        if not v:
            raise ValueError('State distribution must contain at least one state')
        for code, p in v.items():
            if set(code) - {"L", "T"}:
                raise ValueError(f"Invalid state code '{code}': use only 'L' and 'T'")
            if p < 0:
                raise ValueError(f"Probability of state {code} is negative")
        total = math.fsum(v.values())
        if abs(total - 1.0) > PMF_TOLERANCE:
            raise ValueError(f"State probabilities must sum to 1 (got {total:.15f})")
        return v

    @model_validator(mode='after')
    def validate_states(self):
        for code, p in self.pmf.items():
            if len(code) != self.num_relays + 1:
                raise ValueError(f"State code '{code}' must have {self.num_relays + 1} entries")
        if self.reuse_factor is not None:
            limit = max_transmitters(self.num_relays, self.reuse_factor)
            for code, p in self.pmf.items():
                if p > 0 and code.count("T") > limit:
                    raise ValueError(
                        f"State {code} has {code.count('T')} transmitters but reuse factor "
                        f"1/{self.reuse_factor} allows at most {limit}"
                    )
        return self

    def items(self) -> List[Tuple[StateVector, float]]:
        """All states with positive probability, ordered by code."""
        return [(StateVector.from_code(code), p) for code, p in sorted(self.pmf.items()) if p > 0]

    def probability(self, state: StateVector) -> float:
        return self.pmf.get(state.code, 0.0)

    @property
    def is_fixed(self) -> bool:
        return self.knowledge_mode == KnowledgeMode.FIXED_SCHEDULE

    @classmethod
    def deterministic(
        cls,
        code: str,
        knowledge_mode: KnowledgeMode = KnowledgeMode.FIXED_SCHEDULE,
    ) -> "StateDistribution":
        return cls(num_relays=len(code) - 1, pmf={code: 1.0}, knowledge_mode=knowledge_mode)

    @classmethod
    def from_weights(
        cls,
        num_relays: int,
        codes: Sequence[str],
        weights: Sequence[float],
        knowledge_mode: KnowledgeMode = KnowledgeMode.FIXED_SCHEDULE,
        reuse_factor: Optional[int] = None,
    ) -> "StateDistribution":
        """Normalize nonnegative weights into a distribution; all-zero weights are uniform."""
        clipped = [max(float(w), 0.0) for w in weights]
        total = math.fsum(clipped)
        if total <= 0:
            clipped = [1.0] * len(codes)
            total = float(len(codes))
        pmf = {code: w / total for code, w in zip(codes, clipped)}
        # absorb rounding so the sum is exactly representable as 1
        last = codes[-1]
        pmf[last] = max(0.0, 1.0 - math.fsum(v for c, v in pmf.items() if c != last))
        return cls(num_relays=num_relays, pmf=pmf, knowledge_mode=knowledge_mode, reuse_factor=reuse_factor)

    @classmethod
    def uniform(
        cls,
        num_relays: int,
        knowledge_mode: KnowledgeMode = KnowledgeMode.FIXED_SCHEDULE,
    ) -> "StateDistribution":
        codes = all_state_codes(num_relays)
        return cls.from_weights(num_relays, codes, [1.0] * len(codes), knowledge_mode)


class MessageId(NamedTuple):
    """
    Message identity.

    DF messages use (origin, level) with level >= 1: origin 0 is a source
    superposition level, origin j >= 1 is relay j's codeword for that level.
    Level 0 marks a compress-and-forward broadcast message of relay `origin`.
    """
    origin: int
    level: int


def supported_messages(num_relays: int, num_levels: int) -> Dict[MessageId, List[int]]:
    """
    DF message set and the co-senders of each message.

    Source level k is sent by the source only; relay j's level-k message
    (k <= j) is co-sent by the source and relays k..j.
    """
    messages: Dict[MessageId, List[int]] = {}
    for k in range(1, num_levels + 1):
        messages[MessageId(0, k)] = [0]
    for j in range(1, num_relays + 1):
        for k in range(1, min(j, num_levels) + 1):
            messages[MessageId(j, k)] = [0] + list(range(k, j + 1))
    return messages


class PowerShare(BaseModel):
    """Fraction of a node's power spent on one message."""
    supporter: int = Field(..., ge=0)
    origin: int = Field(..., ge=0)
    level: int = Field(..., ge=1)
    fraction: float = Field(..., ge=0.0, le=1.0)


class PowerAllocation(BaseModel):
    """DF power fractions nu and CF broadcast fractions omega."""
    num_relays: int = Field(..., ge=0)
    num_levels: int = Field(default=1, ge=1)
    shares: List[PowerShare] = Field(default_factory=list)
    omega: List[float] = Field(default_factory=list, description="CF broadcast share of relays 1..N")

    @validator('omega', each_item=True)
    def validate_omega(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError('Broadcast fractions must lie in [0, 1]')
        return v

    @model_validator(mode='after')
    def validate_allocation(self):
        if self.num_levels > self.num_relays + 1:
            raise ValueError(f"At most {self.num_relays + 1} message levels are possible with {self.num_relays} relays")
        if self.omega and len(self.omega) != self.num_relays:
            raise ValueError(f"Expected {self.num_relays} broadcast fractions, got {len(self.omega)}")
        messages = supported_messages(self.num_relays, self.num_levels)
        seen = set()
        for share in self.shares:
            key = (share.supporter, share.origin, share.level)
            if key in seen:
                raise ValueError(f"Duplicate power share {key}")
            seen.add(key)
            supporters = messages.get(MessageId(share.origin, share.level))
            if supporters is None:
                raise ValueError(f"Message ({share.origin}, {share.level}) does not exist with {self.num_levels} levels")
            if share.supporter not in supporters:
                raise ValueError(f"Node {share.supporter} cannot support message ({share.origin}, {share.level})")
        for node in range(self.num_relays + 1):
            load = self.node_load(node)
            if load > 1.0 + SHARE_TOLERANCE:
                raise ValueError(f"Power fractions of node {node} sum to {load:.6f} > 1")
        return self

    def share_map(self) -> Dict[Tuple[int, int, int], float]:
        return {(s.supporter, s.origin, s.level): s.fraction for s in self.shares}

    def fraction(self, supporter: int, message: MessageId) -> float:
        return self.share_map().get((supporter, message.origin, message.level), 0.0)

    def broadcast_fraction(self, relay: int) -> float:
        return self.omega[relay - 1] if self.omega else 0.0

    def node_load(self, node: int) -> float:
        load = math.fsum(s.fraction for s in self.shares if s.supporter == node)
        if node >= 1 and self.omega:
            load += self.omega[node - 1]
        return load

    @classmethod
    def from_fractions(
        cls,
        num_relays: int,
        num_levels: int,
        fractions: Dict[Tuple[int, int, int], float],
        omega: Optional[Sequence[float]] = None,
    ) -> "PowerAllocation":
        """Build from a {(supporter, origin, level): fraction} mapping, skipping zeros."""
        shares = [
            PowerShare(supporter=s, origin=o, level=k, fraction=f)
            for (s, o, k), f in sorted(fractions.items()) if f > 0
        ]
        return cls(num_relays=num_relays, num_levels=num_levels, shares=shares, omega=list(omega or []))

    @classmethod
    def source_only(cls, num_relays: int, num_levels: int = 1) -> "PowerAllocation":
        """Full source power on level 1, every relay silent."""
        return cls.from_fractions(num_relays, num_levels, {(0, 0, 1): 1.0})


class ReceiveStats(NamedTuple):
    """Received powers at two receivers and their output covariance."""
    power_first: float
    power_second: float
    covariance: float


class MessageAmplitudeTable(BaseModel):
    """
    Real amplitudes of every message row at every node for one state.

    Coherent networks keep one row per message (co-sender amplitudes added),
    non-coherent networks one row per (message, co-sender). Columns are node
    indices 0..N+1; columns of transmitting nodes are zero.
    """
    state: StateVector
    combining: CombiningMode
    row_messages: List[MessageId] = Field(default_factory=list)
    amplitudes: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    def rows_of(self, messages: Optional[Iterable[MessageId]]) -> np.ndarray:
        """Amplitude rows of the given messages (all rows when None)."""
        if messages is None:
            return self.amplitudes
        wanted = set(messages)
        mask = [m in wanted for m in self.row_messages]
        return self.amplitudes[mask]

    @property
    def messages(self) -> List[MessageId]:
        return list(dict.fromkeys(self.row_messages))
