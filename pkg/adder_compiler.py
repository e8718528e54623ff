"""
Adder Compiler Module
Compiles an addend number A into the full-adder pulse program: one F-gate per
addend bit, each a fixed sequence of phase-corrected Q-pulses, scheduled
back to back with absolute start times.

Gate j sits on spins (2j+2, 2j+1, 2j) = (b, 0, c) and leaves (C, b, s) there.
The rightmost gate is applied first.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from chain_model import BasisState, ChainParams, classical_full_adder
from errors import ContractViolation, DomainError
from pulse_library import (
    AuxiliaryConstants,
    P,
    PhaseExpr,
    PulseParams,
    QPulse,
    QPulseKind,
    ZERO,
    acquired_phase_expr,
    apply_ideal,
    expand,
    local_pattern,
    wrap_phase,
)

logger = logging.getLogger(__name__)


def _h(n: int) -> Fraction:
    return Fraction(n, 2)


# =============================================================================
# DOMAIN TYPES
# =============================================================================

class Position(Enum):
    RIGHT = "right"
    MIDDLE = "middle"
    LEFT = "left"


@dataclass(frozen=True)
class FGate:
    addend_bit: int
    position: Position
    k: int

    def validate(self, L: int):
        if self.addend_bit not in (0, 1):
            raise DomainError(f"addend bit must be 0 or 1, got {self.addend_bit}")
        if self.position is Position.RIGHT and self.k != 1:
            raise DomainError(f"Right gate must sit at k=1, got {self.k}")
        if self.position is Position.LEFT and self.k != L - 2:
            raise DomainError(f"Left gate must sit at k={L - 2}, got {self.k}")
        if self.position is Position.MIDDLE and (self.k % 2 == 0 or not 3 <= self.k <= L - 4):
            raise DomainError(f"Middle gate needs odd 3 <= k <= {L - 4}, got {self.k}")

    @property
    def label(self) -> str:
        return f"{self.position.value.capitalize()} F({self.addend_bit})@k={self.k}"


@dataclass
class Protocol:
    A: int
    l: int
    gates: List[FGate]
    qpulses: List[QPulse]
    schedule: List[PulseParams]
    total_time: float
    symbolic: List[PhaseExpr] = field(default_factory=list)
    # index into schedule of the first physical pulse of every Q-pulse
    qpulse_starts: List[int] = field(default_factory=list)
    aux: Optional[AuxiliaryConstants] = None

    @property
    def qpulse_count(self) -> int:
        return len(self.qpulses)

    @property
    def physical_pulse_count(self) -> int:
        return len(self.schedule)


# =============================================================================
# GATE TABLES
# =============================================================================

Row = Tuple[QPulseKind, int, PhaseExpr]

Q01, Q00, Q11 = QPulseKind.Q01, QPulseKind.Q00, QPulseKind.Q11
Q0E, Q1E = QPulseKind.Q0EDGE, QPulseKind.Q1EDGE

# Rows are (kind, offset from k, phi) in order of application.
_MIDDLE: Dict[int, List[Row]] = {
    0: [
        (Q11, 0, P(gamma=-1, Theta=-2)),
        (Q00, 1, P(gamma=7, Theta=-8, theta=1, alpha=14)),
        (Q00, 0, P(pi=_h(1), gamma=-4, Theta=4, theta=-3)),
        (Q00, 1, P(theta=-1, alpha=5)),
        (Q11, -1, P(pi=1, gamma=5, Theta=-7, theta=_h(5), alpha=5)),
        (Q01, -1, P(pi=1, gamma=2, Theta=-2, theta=1, alpha=2)),
        (Q01, -1, ZERO),
        (Q00, 0, P(gamma=-8, Theta=10, theta=-2, alpha=-11)),
        (Q01, 0, P(pi=1, gamma=-5, Theta=7, theta=_h(-1), alpha=-7)),
        (Q11, 0, P(theta=1, alpha=-1)),
        (Q00, -1, ZERO),
        (Q00, 0, ZERO),
        (Q01, 0, ZERO),
    ],
    1: [
        (Q11, 0, P(pi=1, gamma=-2, Theta=-4, theta=-3, alpha=1)),
        (Q00, -1, P(pi=_h(-1), gamma=3, Theta=-1, theta=_h(3), alpha=1)),
        (Q01, -1, P(pi=_h(-1), gamma=-1, Theta=3, theta=_h(1))),
        (Q11, -1, P(pi=_h(-1), gamma=-3, Theta=3, theta=_h(-1), alpha=1)),
        (Q11, 0, P(gamma=-4, theta=-3, alpha=-1)),
        (Q00, 0, P(pi=_h(-1), theta=-1)),
        (Q00, 1, ZERO),
        (Q00, 0, ZERO),
        (Q00, 1, ZERO),
        (Q11, -1, P(pi=1, gamma=-3, Theta=3, theta=_h(-1), alpha=-1)),
        (Q01, 0, ZERO),
        (Q11, 0, ZERO),
        (Q00, -1, ZERO),
        (Q01, 0, ZERO),
        (Q11, 0, ZERO),
    ],
}

# Spin k+1 = L-1 is the chain edge, driven with Q0 edge pulses.
_LEFT: Dict[int, List[Row]] = {
    0: [
        (Q11, 0, P(gamma=-1, theta=-1)),
        (Q0E, 1, P(gamma=7, Theta=-8, theta=_h(3), alpha=1)),
        (Q00, 0, P(pi=_h(-1), gamma=-3, Theta=3)),
        (Q0E, 1, P(alpha=-1)),
        (Q11, -1, P(pi=1, gamma=5, Theta=-7)),
        (Q01, -1, P(pi=1, gamma=2, Theta=-2, theta=1, alpha=2)),
        (Q01, -1, ZERO),
        (Q00, 0, P(gamma=-8, Theta=10)),
        (Q01, 0, P(pi=1, gamma=-5, Theta=7)),
        (Q11, 0, P(alpha=2)),
        (Q00, -1, P(theta=-1, alpha=-1)),
        (Q00, 0, P(theta=_h(3), alpha=4)),
        (Q01, 0, ZERO),
    ],
    1: [
        (Q11, 0, P(pi=1, gamma=-2, Theta=-2, theta=_h(-5), alpha=-1)),
        (Q00, -1, P(pi=_h(-1), gamma=3, Theta=-1, theta=1, alpha=1)),
        (Q01, -1, P(pi=_h(-1), gamma=-1, Theta=3)),
        (Q11, -1, P(pi=_h(-1), gamma=-3, Theta=3, theta=-1, alpha=1)),
        (Q11, 0, P(gamma=-4, Theta=2, theta=-1, alpha=-2)),
        (Q00, 0, P(pi=_h(1), gamma=-1, Theta=-1, theta=-2, alpha=1)),
        (Q0E, 1, P(theta=_h(1))),
        (Q00, 0, ZERO),
        (Q0E, 1, ZERO),
        (Q11, -1, P(pi=1, gamma=-3, Theta=3)),
        (Q01, 0, ZERO),
        (Q11, 0, P(theta=_h(1), alpha=1)),
        (Q00, -1, ZERO),
        (Q01, 0, ZERO),
        (Q11, 0, ZERO),
    ],
}

# Spin 0 is the chain edge; the input carry of the right gate is always 0.
_RIGHT: Dict[int, List[Row]] = {
    0: [
        (Q01, 0, P(pi=_h(-1), alpha=3)),
        (Q01, 1, ZERO),
        (Q1E, -1, ZERO),
    ],
    1: [
        (Q01, 0, P(pi=_h(1), alpha=4)),
        (Q0E, -1, P(pi=_h(1), alpha=2)),
    ],
}

_TABLES = {Position.MIDDLE: _MIDDLE, Position.LEFT: _LEFT, Position.RIGHT: _RIGHT}

GLOBAL_PHASE = P(alpha=-3)


def gate_rows(g: FGate, L: int) -> List[Tuple[QPulseKind, int, PhaseExpr]]:
    """Symbolic pulse list of a gate: (kind, absolute target spin, phi)."""
    g.validate(L)
    rows = []
    for kind, offset, phi in _TABLES[g.position][g.addend_bit]:
        target = g.k + offset
        # A single-gate register has its left edge at spin 2
        if kind is Q01 and target == L - 1:
            kind = Q1E
        rows.append((kind, target, phi))
    return rows


# =============================================================================
# COMPILATION
# =============================================================================

def gates_for(A: int, l: int) -> List[FGate]:
    """F-gates of FA(A) in order of application (low addend bit first)."""
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    if not 0 <= A < (1 << l):
        raise DomainError(f"A={A} outside 0..{(1 << l) - 1}")
    L = 2 * l + 1
    gates = []
    for j in range(l):
        bit = (A >> j) & 1
        k = 2 * j + 1
        if j == 0:
            position = Position.RIGHT
        elif j == l - 1:
            position = Position.LEFT
        else:
            position = Position.MIDDLE
        gates.append(FGate(addend_bit=bit, position=position, k=k))
    for g in gates:
        g.validate(L)
    return gates


def compile_fgate(g: FGate, aux: AuxiliaryConstants, L: Optional[int] = None) -> List[QPulse]:
    """Q-pulses of one gate with the protocol phases evaluated numerically."""
    if L is None:
        L = g.k + 2 if g.position is Position.LEFT else max(g.k + 4, 3)
    return [QPulse(kind, target, wrap_phase(phi.evaluate(aux)))
            for kind, target, phi in gate_rows(g, L)]


def compile_full_adder(A: int, l: int, aux: AuxiliaryConstants, p: ChainParams) -> Protocol:
    if p.L != 2 * l + 1:
        raise ContractViolation(f"chain has {p.L} spins, addend of {l} bits needs {2 * l + 1}")
    gates = gates_for(A, l)

    qpulses: List[QPulse] = []
    symbolic: List[PhaseExpr] = []
    for g in gates:
        for kind, target, phi in gate_rows(g, p.L):
            qpulses.append(QPulse(kind, target, wrap_phase(phi.evaluate(aux))))
            symbolic.append(phi)

    schedule: List[PulseParams] = []
    starts: List[int] = []
    t = 0.0
    for q in qpulses:
        starts.append(len(schedule))
        for pulse in expand(q, aux, p, t):
            schedule.append(pulse)
            t = pulse.t_end

    logger.info(
        "Compiled FA(%d) for l=%d: %d Q-pulses, %d physical pulses, T=%.6g",
        A, l, len(qpulses), len(schedule), t,
    )
    return Protocol(
        A=A, l=l, gates=gates, qpulses=qpulses, schedule=schedule,
        total_time=t, symbolic=symbolic, qpulse_starts=starts, aux=aux,
    )


def expected_global_phase(protocol: Protocol) -> float:
    """Common phase every branch acquires: -3 alpha, from the right gate."""
    if protocol.aux is None:
        raise DomainError("protocol carries no auxiliary constants")
    return wrap_phase(GLOBAL_PHASE.evaluate(protocol.aux))


# =============================================================================
# IDEAL (BIT-LEVEL) ACTION
# =============================================================================

def check_encoded_layout(s: BasisState, l: int):
    L = 2 * l + 1
    if len(s) != L:
        raise DomainError(f"register has {len(s)} spins, expected {L}")
    for k in range(0, L - 1):
        if (k % 2 == 1 or k == 0) and s.bit(k):
            raise DomainError(f"spin {k} must be clear in an encoded register ({s})")


def ideal_action(s: BasisState, A: int, l: int) -> BasisState:
    """Classical result of FA(A) on an encoded register, gate by gate."""
    check_encoded_layout(s, l)
    bits = s.to_list()
    for j, g in enumerate(gates_for(A, l)):
        c = bits[2 * j]
        b = bits[2 * j + 2]
        total, carry = classical_full_adder(g.addend_bit, b, c)
        bits[2 * j], bits[2 * j + 1], bits[2 * j + 2] = total, b, carry
    return BasisState.from_bits(bits)


def ideal_trajectory(s: BasisState, qpulses: Sequence[QPulse]) -> List[BasisState]:
    """States after every Q-pulse under the resonant-flip rule (first entry is s)."""
    states = [s]
    for q in qpulses:
        states.append(apply_ideal(q, states[-1]))
    return states


# =============================================================================
# GATE CHECKS
# =============================================================================

def _gate_inputs(g: FGate, L: int) -> List[BasisState]:
    """Every register consistent with the gate's input condition, on spins k-2..k+2."""
    free = [g.k + 1]
    if g.position is not Position.RIGHT:
        free.append(g.k - 1)
    if g.k - 2 >= 0:
        free.append(g.k - 2)
    states = []
    for values in itertools.product((0, 1), repeat=len(free)):
        bits = [0] * L
        for spin, v in zip(free, values):
            bits[spin] = v
        states.append(BasisState.from_bits(bits))
    return states


def _gate_expected(g: FGate, s: BasisState) -> BasisState:
    c = s.bit(g.k - 1)
    b = s.bit(g.k + 1)
    total, carry = classical_full_adder(g.addend_bit, b, c)
    bits = s.to_list()
    bits[g.k - 1], bits[g.k], bits[g.k + 1] = total, b, carry
    return BasisState.from_bits(bits)


def gate_phase_sums(g: FGate, L: int,
                    rows: Optional[List[Tuple[QPulseKind, int, PhaseExpr]]] = None
                    ) -> Dict[BasisState, PhaseExpr]:
    """Exact phase accumulated along the resonant path for every gate input."""
    rows = gate_rows(g, L) if rows is None else rows
    sums = {}
    for start in _gate_inputs(g, L):
        s = start
        total = ZERO
        for kind, target, phi in rows:
            phase, flip = acquired_phase_expr(kind, local_pattern(s, target), phi)
            total = total + phase
            if flip:
                s = s.flip(target)
        sums[start] = total
    return sums


def is_phase_corrected(g: FGate, L: int,
                       rows: Optional[List[Tuple[QPulseKind, int, PhaseExpr]]] = None) -> bool:
    """Every input acquires the same phase modulo 2 pi."""
    values = list(gate_phase_sums(g, L, rows).values())
    return all(v.equal_mod_2pi(values[0]) for v in values[1:])


def gate_probability_correct(g: FGate, L: int) -> bool:
    """Resonant-flip rule maps every gate input to the full-adder output."""
    qpulses = [QPulse(kind, target, 0.0) for kind, target, _ in gate_rows(g, L)]
    for start in _gate_inputs(g, L):
        if ideal_trajectory(start, qpulses)[-1] != _gate_expected(g, start):
            return False
    return True


# =============================================================================
# TEXT FORMAT
# =============================================================================

def format_schedule(protocol: Protocol, header: Optional[Dict[str, object]] = None) -> str:
    """One physical pulse per line: index kind k Omega nu tau phi t0."""
    lines = []
    for key, value in (header or {}).items():
        lines.append(f"# {key}={value}")
    lines.append("# index kind k Omega nu tau phi t0")
    for i, pulse in enumerate(protocol.schedule):
        lines.append(
            f"{i} {pulse.kind.value} {pulse.k} {pulse.rabi:.17g} {pulse.nu:.17g} "
            f"{pulse.tau:.17g} {pulse.phi:.17g} {pulse.t0:.17g}"
        )
    return "\n".join(lines) + "\n"


def parse_schedule(text: str) -> List[PulseParams]:
    pulses: List[PulseParams] = []
    previous: Optional[PulseParams] = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 8:
            raise DomainError(f"line {lineno}: expected 8 fields, got {len(fields)}")
        try:
            kind = QPulseKind(fields[1])
            k = int(fields[2])
            rabi, nu, tau, phi, t0 = (float(x) for x in fields[3:])
        except ValueError as e:
            raise DomainError(f"line {lineno}: {e}") from e
        sub = 0
        if (previous is not None and previous.kind is kind and previous.k == k
                and kind.physical_pulses == 2 and previous.sub == 0
                and math.isclose(previous.t_end, t0, rel_tol=1e-12, abs_tol=1e-9)):
            sub = 1
        pulse = PulseParams(rabi=rabi, nu=nu, tau=tau, phi=phi, t0=t0, kind=kind, k=k, sub=sub)
        pulses.append(pulse)
        previous = pulse
    return pulses


def protocol_from_schedule(schedule: List[PulseParams], l: int,
                           aux: Optional[AuxiliaryConstants] = None) -> Protocol:
    """Rebuild the Q-pulse view of a parsed schedule (A is unknown, stored as -1)."""
    qpulses: List[QPulse] = []
    starts: List[int] = []
    for i, pulse in enumerate(schedule):
        if pulse.sub == 0:
            starts.append(i)
            qpulses.append(QPulse(pulse.kind, pulse.k, pulse.phi))
    total = schedule[-1].t_end if schedule else 0.0
    return Protocol(A=-1, l=l, gates=[], qpulses=qpulses, schedule=list(schedule),
                    total_time=total, qpulse_starts=starts, aux=aux)
