"""
Chain Model Module
Static model of the Ising spin chain: energies, transition frequencies,
neighbour classification, the adder register layout and a classical
full-adder oracle.

Units: hbar = 1, J = 1. Bit 0 is a spin aligned with the permanent field
(I^z = +1/2), bit 1 the opposite orientation.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Tuple

import numpy as np

from config import ISING_J, MIN_DELTA_OMEGA_RATIO, OMEGA0, WARN_DELTA_OMEGA_RATIO
from errors import ContractViolation, DomainError

logger = logging.getLogger(__name__)


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class ChainParams:
    """
    Physical constants of the chain.

    The Larmor frequency of spin k is omega0 + k * delta_omega and the chain
    holds L = 2l + 1 spins (l addend qubits plus the carry/spacer qubits).
    """

    l: int
    delta_omega: float
    omega0: float = OMEGA0
    J: float = ISING_J

    def __post_init__(self):
        if self.l < 1:
            raise DomainError(f"addend qubit count l must be >= 1, got {self.l}")
        if self.J != ISING_J:
            raise DomainError("J is the unit of frequency and must equal 1")
        if self.delta_omega < MIN_DELTA_OMEGA_RATIO * self.J:
            raise DomainError(
                f"delta_omega={self.delta_omega} violates delta_omega >= "
                f"{MIN_DELTA_OMEGA_RATIO:g}*J"
            )
        if self.delta_omega < WARN_DELTA_OMEGA_RATIO * self.J:
            logger.warning(
                "delta_omega=%g is below %g*J; nonresonant errors will be large",
                self.delta_omega, WARN_DELTA_OMEGA_RATIO,
            )

    @property
    def L(self) -> int:
        return 2 * self.l + 1

    def larmor(self, k: int) -> float:
        return self.omega0 + k * self.delta_omega

    def larmor_array(self) -> np.ndarray:
        return self.omega0 + self.delta_omega * np.arange(self.L, dtype=float)


class BasisState:
    """
    Computational basis label of an L-spin register.

    Stored packed in a Python int (bit k = n_k), so comparison and hashing
    cost O(L/30) machine digits even at L = 2001.
    """

    __slots__ = ("bits", "length")

    def __init__(self, bits: int, length: int):
        if length < 1:
            raise ContractViolation("basis state length must be positive")
        if bits < 0 or bits >> length:
            raise ContractViolation(f"bits {bits:#x} do not fit in {length} spins")
        self.bits = bits
        self.length = length

    @classmethod
    def zeros(cls, length: int) -> "BasisState":
        return cls(0, length)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BasisState":
        """Build from a sequence indexed by spin number (element k = n_k)."""
        value = 0
        count = 0
        for k, b in enumerate(bits):
            if b not in (0, 1):
                raise ContractViolation(f"bit {k} must be 0 or 1, got {b}")
            value |= b << k
            count += 1
        return cls(value, count)

    @classmethod
    def from_string(cls, text: str) -> "BasisState":
        """Parse 'n_{L-1} ... n_1 n_0' written left to right like |...0_1 0_0>."""
        text = text.strip().replace(" ", "")
        return cls.from_bits(int(ch) for ch in reversed(text))

    def __len__(self) -> int:
        return self.length

    def bit(self, k: int) -> int:
        if not 0 <= k < self.length:
            raise ContractViolation(f"spin index {k} outside 0..{self.length - 1}")
        return (self.bits >> k) & 1

    def flip(self, k: int) -> "BasisState":
        if not 0 <= k < self.length:
            raise ContractViolation(f"spin index {k} outside 0..{self.length - 1}")
        return BasisState(self.bits ^ (1 << k), self.length)

    def to_list(self) -> List[int]:
        return [(self.bits >> k) & 1 for k in range(self.length)]

    def to_array(self) -> np.ndarray:
        return np.array(self.to_list(), dtype=np.int8)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BasisState):
            return NotImplemented
        return self.bits == other.bits and self.length == other.length

    def __hash__(self) -> int:
        return hash((self.bits, self.length))

    def __str__(self) -> str:
        return "".join(str(b) for b in reversed(self.to_list()))

    def __repr__(self) -> str:
        return f"BasisState('{self}')"


class NeighborConfig(Enum):
    """States of the neighbours of spin k (k-1 and k+1, or the single one at an edge)."""

    BOTH0 = "both0"
    MIXED = "mixed"
    BOTH1 = "both1"
    EDGE0 = "edge0"
    EDGE1 = "edge1"


# Transition frequency of spin k relative to its Larmor frequency, in units of J
_CONFIG_SHIFT = {
    NeighborConfig.BOTH0: 2.0,
    NeighborConfig.MIXED: 0.0,
    NeighborConfig.BOTH1: -2.0,
    NeighborConfig.EDGE0: 1.0,
    NeighborConfig.EDGE1: -1.0,
}


# =============================================================================
# OPERATIONS
# =============================================================================

def _check_length(s: BasisState, p: ChainParams):
    if len(s) != p.L:
        raise ContractViolation(f"state has {len(s)} spins, chain has {p.L}")


def state_energy(s: BasisState, p: ChainParams) -> float:
    """Diagonal part H0 of the Hamiltonian, I_k^z -> (1/2 - n_k)."""
    _check_length(s, p)
    z = 0.5 - s.to_array().astype(float)
    zeeman = -float(np.dot(p.larmor_array(), z))
    ising = -2.0 * p.J * float(np.dot(z[:-1], z[1:]))
    return zeeman + ising


def energy_vector(p: ChainParams) -> np.ndarray:
    """H0 eigenvalue of every basis state, indexed by the packed bit value."""
    index = np.arange(1 << p.L, dtype=np.int64)
    z = np.stack([0.5 - ((index >> k) & 1) for k in range(p.L)]).astype(float)
    energies = -(p.larmor_array()[:, None] * z).sum(axis=0)
    energies -= 2.0 * p.J * (z[:-1] * z[1:]).sum(axis=0)
    return energies


def magnetization_vector(L: int) -> np.ndarray:
    """Eigenvalue of sum_k I_k^z for every basis state."""
    index = np.arange(1 << L, dtype=np.int64)
    ones = np.zeros(1 << L, dtype=float)
    for k in range(L):
        ones += (index >> k) & 1
    return 0.5 * L - ones


def neighbor_config(s: BasisState, k: int) -> NeighborConfig:
    """Classify the neighbours of spin k; the state of spin k itself is ignored."""
    L = len(s)
    if not 0 <= k < L:
        raise ContractViolation(f"spin index {k} outside 0..{L - 1}")
    if k == 0 or k == L - 1:
        neighbor = s.bit(1) if k == 0 else s.bit(L - 2)
        return NeighborConfig.EDGE1 if neighbor else NeighborConfig.EDGE0
    left, right = s.bit(k - 1), s.bit(k + 1)
    if left != right:
        return NeighborConfig.MIXED
    return NeighborConfig.BOTH1 if left else NeighborConfig.BOTH0


def transition_frequency(s: BasisState, k: int, p: ChainParams) -> float:
    """
    |E(s with spin k flipped) - E(s)| from the closed-form neighbour table.

    The table value omega_k + shift is negative only for the Edge1 spin 0
    with omega0 < J, so the magnitude is returned.
    """
    _check_length(s, p)
    return abs(p.larmor(k) + _CONFIG_SHIFT[neighbor_config(s, k)] * p.J)


def flip_energy(s: BasisState, k: int, p: ChainParams) -> float:
    """Signed E(s with spin k flipped) - E(s)."""
    return state_energy(s.flip(k), p) - state_energy(s, p)


def encode_addend_register(B: int, l: int) -> BasisState:
    """
    Place the addend bits of B on the even spins 2, 4, ..., 2l.

    Layout |b^{l-1}_{L-1} 0_{L-2} ... b^1_4 0_3 b^0_2 0_1 0_0>.
    """
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    if not 0 <= B < (1 << l):
        raise DomainError(f"B={B} outside 0..{(1 << l) - 1}")
    bits = 0
    for j in range(l):
        if (B >> j) & 1:
            bits |= 1 << (2 * j + 2)
    return BasisState(bits, 2 * l + 1)


def decode_sum(s: BasisState, l: int) -> int:
    """Read sum bits from spins 0, 2, ..., 2l-2 and the final carry from spin 2l."""
    value = 0
    for j in range(l + 1):
        value |= s.bit(2 * j) << j
    return value


def classical_full_adder(a: int, b: int, c: int) -> Tuple[int, int]:
    """Table for binary addition: (sum, carry)."""
    for name, bit in (("a", a), ("b", b), ("c", c)):
        if bit not in (0, 1):
            raise DomainError(f"{name} must be 0 or 1, got {bit}")
    s = a ^ b ^ c
    carry = (a & b) ^ (a & c) ^ (b & c)
    return s, carry
