"""
Pulse Library Module
2*pi*K-condition pulse parameters, auxiliary phase constants, expansion of
logical Q-pulses into timed rectangular pulses, and the tables of phases the
Q-pulses imprint on each local spin pattern.

A Q-pulse Q^{ab}_k(phi) flips spin k only when its neighbours are in the
pattern ab; the near-resonant transitions of the other patterns complete
whole Rabi cycles (2*pi*K condition) and come back with a known phase.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from chain_model import BasisState, ChainParams
from errors import DomainError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def wrap_phase(x: float) -> float:
    """Map an angle into (-pi, pi]."""
    y = math.remainder(x, TWO_PI)
    return math.pi if y == -math.pi else y


# =============================================================================
# DOMAIN TYPES
# =============================================================================

class QPulseKind(Enum):
    Q01 = "Q01"
    Q00 = "Q00"
    Q11 = "Q11"
    Q0EDGE = "Q0edge"
    Q1EDGE = "Q1edge"

    @property
    def is_edge(self) -> bool:
        return self in (QPulseKind.Q0EDGE, QPulseKind.Q1EDGE)

    @property
    def physical_pulses(self) -> int:
        return 2 if self in (QPulseKind.Q00, QPulseKind.Q11) else 1


@dataclass(frozen=True)
class AuxiliaryConstants:
    K: int
    K2: int
    Kc: int
    Omega: float
    Omega2: float
    OmegaC: float
    theta: float
    Theta: float
    beta: float
    gamma: float
    alpha: float


@dataclass(frozen=True)
class QPulse:
    kind: QPulseKind
    k: int
    phi: float

    def validate(self, L: int):
        if not 0 <= self.k < L:
            raise DomainError(f"{self.kind.value} targets spin {self.k} outside 0..{L - 1}")
        at_edge = self.k in (0, L - 1)
        if self.kind.is_edge and not at_edge:
            raise DomainError(f"edge pulse {self.kind.value} on interior spin {self.k}")
        if not self.kind.is_edge and at_edge:
            raise DomainError(f"interior pulse {self.kind.value} on edge spin {self.k}")


@dataclass(frozen=True)
class PulseParams:
    """One rectangular rf pulse; kind/k/sub label the Q-pulse it realizes."""

    rabi: float
    nu: float
    tau: float
    phi: float
    t0: float
    kind: Optional[QPulseKind] = None
    k: int = -1
    sub: int = 0

    def __post_init__(self):
        if self.rabi <= 0:
            raise DomainError(f"Rabi frequency must be positive, got {self.rabi}")
        if self.tau < 0:
            raise DomainError(f"pulse duration must be non-negative, got {self.tau}")

    @property
    def t_end(self) -> float:
        return self.t0 + self.tau


# =============================================================================
# AUXILIARY CONSTANTS
# =============================================================================

def rabi_2pik(K: int, J: float = 1.0) -> float:
    """Omega(K) = J / sqrt(K^2 - 1/4)."""
    return J / math.sqrt(K * K - 0.25)


def compute_aux(K: int, K2: Optional[int] = None, Kc: Optional[int] = None,
                J: float = 1.0) -> AuxiliaryConstants:
    """
    Populate every constant of the Q-pulse construction.

    K2 and Kc default to 2K, which keeps Omega2 and OmegaC close to Omega.
    The phase tables assume K even; odd K adds pi to the non-flip rows of
    Q01 and the edge pulses.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    K2 = 2 * K if K2 is None else K2
    Kc = 2 * K if Kc is None else Kc
    if K2 < 1 or Kc < 1:
        raise DomainError(f"K2 and Kc must be >= 1, got K2={K2}, Kc={Kc}")
    if K % 2:
        logger.warning("K=%d is odd; tabulated phases hold for even K only", K)

    omega = rabi_2pik(K, J)
    root2 = math.sqrt(K2 * K2 - 0.25)
    omega2 = 2.0 * J / root2
    theta = math.pi * root2

    # First pulse seen by a mixed-neighbour state: partial rotation by x
    x = 0.5 * math.pi * math.sqrt(K2 * K2 + 0.75)
    r = math.sqrt((K2 * K2 - 0.25) / (K2 * K2 + 0.75))
    # Branch fixed so that cos x - i r sin x = |.| e^{i Theta}
    big_theta = math.atan2(-r * math.sin(x), math.cos(x))
    beta = math.atan(math.sin(big_theta) / root2)

    ratio = math.pi * Kc / (math.pi + beta)
    if ratio <= 1.0:
        raise DomainError(f"Kc={Kc} too small for the correction pulse")
    omega_c = 2.0 * J / math.sqrt(ratio * ratio - 1.0)
    gamma = math.sqrt((math.pi * Kc) ** 2 - (math.pi + beta) ** 2)
    alpha = math.pi * math.sqrt(K * K - 0.25)

    return AuxiliaryConstants(
        K=K, K2=K2, Kc=Kc,
        Omega=omega, Omega2=omega2, OmegaC=omega_c,
        theta=theta, Theta=big_theta, beta=beta, gamma=gamma, alpha=alpha,
    )


def correction_duration(aux: AuxiliaryConstants) -> float:
    return 2.0 * (math.pi + aux.beta) / aux.OmegaC


def qpulse_duration(kind: QPulseKind, aux: AuxiliaryConstants) -> float:
    if kind in (QPulseKind.Q00, QPulseKind.Q11):
        return math.pi / aux.Omega2 + correction_duration(aux)
    return math.pi / aux.Omega


# =============================================================================
# EXPANSION INTO RECTANGULAR PULSES
# =============================================================================

def expand(q: QPulse, aux: AuxiliaryConstants, p: ChainParams, t0: float) -> List[PulseParams]:
    """Physical pulses realizing q, starting back to back at t0."""
    q.validate(p.L)
    larmor = p.larmor(q.k)
    J = p.J

    if q.kind in (QPulseKind.Q01, QPulseKind.Q0EDGE, QPulseKind.Q1EDGE):
        shift = {QPulseKind.Q01: 0.0, QPulseKind.Q0EDGE: J, QPulseKind.Q1EDGE: -J}[q.kind]
        return [PulseParams(
            rabi=aux.Omega, nu=larmor + shift, tau=math.pi / aux.Omega,
            phi=wrap_phase(q.phi), t0=t0, kind=q.kind, k=q.k,
        )]

    tau1 = math.pi / aux.Omega2
    if q.kind is QPulseKind.Q00:
        nu1 = larmor + 2.0 * J
        phi_c = aux.theta + q.phi + 2.0 * J * t0 + aux.Theta
    else:
        nu1 = larmor - 2.0 * J
        phi_c = -aux.theta + q.phi - 2.0 * J * t0 - aux.Theta

    first = PulseParams(
        rabi=aux.Omega2, nu=nu1, tau=tau1, phi=wrap_phase(q.phi), t0=t0,
        kind=q.kind, k=q.k, sub=0,
    )
    correction = PulseParams(
        rabi=aux.OmegaC, nu=larmor, tau=correction_duration(aux),
        phi=wrap_phase(phi_c), t0=t0 + tau1, kind=q.kind, k=q.k, sub=1,
    )
    return [first, correction]


# =============================================================================
# ACQUIRED PHASES
# =============================================================================

_SYMBOLS = ("pi", "alpha", "gamma", "theta", "Theta")


@dataclass(frozen=True)
class PhaseExpr:
    """
    Integer/half-integer combination of pi, alpha, gamma, theta and Theta.

    Keeps the phase tables exact so that phase-correctedness of a gate can
    be decided without floating point.
    """

    pi: Fraction = Fraction(0)
    alpha: Fraction = Fraction(0)
    gamma: Fraction = Fraction(0)
    theta: Fraction = Fraction(0)
    Theta: Fraction = Fraction(0)

    @classmethod
    def of(cls, **coeffs) -> "PhaseExpr":
        return cls(**{name: Fraction(value) for name, value in coeffs.items()})

    def _coeffs(self) -> Tuple[Fraction, ...]:
        return tuple(getattr(self, name) for name in _SYMBOLS)

    def __add__(self, other: "PhaseExpr") -> "PhaseExpr":
        return PhaseExpr(*(a + b for a, b in zip(self._coeffs(), other._coeffs())))

    def __sub__(self, other: "PhaseExpr") -> "PhaseExpr":
        return PhaseExpr(*(a - b for a, b in zip(self._coeffs(), other._coeffs())))

    def __neg__(self) -> "PhaseExpr":
        return PhaseExpr(*(-a for a in self._coeffs()))

    def scale(self, factor: int) -> "PhaseExpr":
        return PhaseExpr(*(a * factor for a in self._coeffs()))

    def evaluate(self, aux: AuxiliaryConstants) -> float:
        return (float(self.pi) * math.pi + float(self.alpha) * aux.alpha
                + float(self.gamma) * aux.gamma + float(self.theta) * aux.theta
                + float(self.Theta) * aux.Theta)

    def equal_mod_2pi(self, other: "PhaseExpr") -> bool:
        diff = self - other
        if any(getattr(diff, name) != 0 for name in _SYMBOLS[1:]):
            return False
        return diff.pi.denominator == 1 and diff.pi.numerator % 2 == 0

    def __str__(self) -> str:
        parts = []
        for name in _SYMBOLS:
            c = getattr(self, name)
            if c:
                parts.append(f"{c}*{name}" if c != 1 else name)
        return " + ".join(parts) if parts else "0"


ZERO = PhaseExpr()
PI = PhaseExpr.of(pi=1)


def P(pi=0, alpha=0, gamma=0, theta=0, Theta=0) -> PhaseExpr:
    return PhaseExpr.of(pi=pi, alpha=alpha, gamma=gamma, theta=theta, Theta=Theta)


# (constant part, sign of phi, resonant flip)
TableEntry = Tuple[PhaseExpr, int, bool]

_HALF = Fraction(1, 2)

# Intermediate spins, keyed by (n_{k+1}, n_k, n_{k-1})
_INTERIOR_TABLE: Dict[QPulseKind, Dict[Tuple[int, int, int], TableEntry]] = {
    QPulseKind.Q01: {
        (0, 0, 0): (P(alpha=-1), 0, False),
        (0, 1, 0): (P(alpha=1), 0, False),
        (1, 0, 0): (P(pi=_HALF), -1, True),
        (1, 1, 0): (P(pi=_HALF), 1, True),
        (0, 0, 1): (P(pi=_HALF), -1, True),
        (0, 1, 1): (P(pi=_HALF), 1, True),
        (1, 0, 1): (P(alpha=1), 0, False),
        (1, 1, 1): (P(alpha=-1), 0, False),
    },
    QPulseKind.Q00: {
        (0, 0, 0): (P(pi=_HALF, gamma=1), -1, True),
        (0, 1, 0): (P(pi=_HALF, gamma=-1), 1, True),
        (1, 0, 0): (P(pi=1, theta=_HALF, Theta=1), 0, False),
        (1, 1, 0): (P(pi=1, theta=-_HALF, Theta=-1), 0, False),
        (0, 0, 1): (P(pi=1, theta=_HALF, Theta=1), 0, False),
        (0, 1, 1): (P(pi=1, theta=-_HALF, Theta=-1), 0, False),
        (1, 0, 1): (P(theta=1, gamma=1), 0, False),
        (1, 1, 1): (P(theta=-1, gamma=-1), 0, False),
    },
    QPulseKind.Q11: {
        (0, 0, 0): (P(theta=-1, gamma=-1), 0, False),
        (0, 1, 0): (P(theta=1, gamma=1), 0, False),
        (1, 0, 0): (P(pi=1, theta=-_HALF, Theta=-1), 0, False),
        (1, 1, 0): (P(pi=1, theta=_HALF, Theta=1), 0, False),
        (0, 0, 1): (P(pi=1, theta=-_HALF, Theta=-1), 0, False),
        (0, 1, 1): (P(pi=1, theta=_HALF, Theta=1), 0, False),
        (1, 0, 1): (P(pi=_HALF, gamma=-1), -1, True),
        (1, 1, 1): (P(pi=_HALF, gamma=1), 1, True),
    },
}

# Edge spins (k = 0 or L-1), keyed by (n_neighbour, n_k)
_EDGE_TABLE: Dict[QPulseKind, Dict[Tuple[int, int], TableEntry]] = {
    QPulseKind.Q0EDGE: {
        (0, 0): (P(pi=_HALF), -1, True),
        (0, 1): (P(pi=_HALF), 1, True),
        (1, 0): (P(alpha=1), 0, False),
        (1, 1): (P(alpha=-1), 0, False),
    },
    # Flip rows follow the propagator (0 -> 1 acquires pi/2 - phi for every
    # resonant pulse), confirmed by exact 3-spin runs in check_phase_tables
    # and test_edge1_flip_phase_sign; only phi = 0 instances appear in the protocols.
    QPulseKind.Q1EDGE: {
        (0, 0): (P(alpha=-1), 0, False),
        (0, 1): (P(alpha=1), 0, False),
        (1, 0): (P(pi=_HALF), -1, True),
        (1, 1): (P(pi=_HALF), 1, True),
    },
}


def local_pattern(s: BasisState, k: int) -> Tuple[int, ...]:
    """(n_{k+1}, n_k, n_{k-1}) for interior spins, (n_neighbour, n_k) at the edges."""
    L = len(s)
    if k == 0:
        return (s.bit(1), s.bit(0))
    if k == L - 1:
        return (s.bit(L - 2), s.bit(L - 1))
    return (s.bit(k + 1), s.bit(k), s.bit(k - 1))


def table_entry(kind: QPulseKind, config: Tuple[int, ...]) -> TableEntry:
    table = _EDGE_TABLE if kind.is_edge else _INTERIOR_TABLE
    expected = 2 if kind.is_edge else 3
    if len(config) != expected:
        raise DomainError(f"{kind.value} needs a {expected}-spin pattern, got {config}")
    return table[kind][tuple(config)]


def resonant_flip(kind: QPulseKind, config: Tuple[int, ...]) -> bool:
    return table_entry(kind, config)[2]


def acquired_phase_expr(kind: QPulseKind, config: Tuple[int, ...],
                        phi: PhaseExpr) -> Tuple[PhaseExpr, bool]:
    const, sign, flip = table_entry(kind, config)
    return const + phi.scale(sign), flip


def acquired_phase(kind: QPulseKind, config: Tuple[int, ...], phi: float,
                   aux: AuxiliaryConstants) -> Tuple[float, bool]:
    """Tabulated phase (wrapped to (-pi, pi]) and whether spin k flips."""
    const, sign, flip = table_entry(kind, config)
    return wrap_phase(const.evaluate(aux) + sign * phi), flip


def flips_state(q: QPulse, s: BasisState) -> bool:
    return resonant_flip(q.kind, local_pattern(s, q.k))


def apply_ideal(q: QPulse, s: BasisState) -> BasisState:
    """Bit-level action of a Q-pulse: flip spin k iff its pattern is resonant."""
    return s.flip(q.k) if flips_state(q, s) else s
