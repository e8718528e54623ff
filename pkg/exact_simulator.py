"""
Exact Simulator Module
Numerically exact evolution of the full 2^L amplitude vector under each
rectangular pulse, error metrics against the ideal adder, and per-Q-pulse
error traces.

Amplitudes are kept in the interaction representation. Each pulse is
propagated in the frame rotating at its carrier frequency, where the
Hamiltonian is time independent:

    c(t1) = e^{i Er t1} U_r(tau) e^{-i Er t0} c(t0),   Er = E + nu * Z

with Z = sum_k I_k^z. The carrier phase enters as a diagonal similarity,
H_r(phi) = e^{i phi Z} H_r(0) e^{-i phi Z}, so one eigendecomposition of the
real matrix H_r(0) serves every pulse with the same (Omega, nu).
"""
import csv
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, expm

from adder_compiler import Protocol, ideal_action, ideal_trajectory
from chain_model import BasisState, ChainParams, energy_vector, magnetization_vector
from config import DEGENERATE_AMPLITUDE, EIG_CACHE_SIZE, EXACT_MAX_SPINS, NORM_TOLERANCE
from errors import ContractViolation, DegenerateAmplitudeError, InvariantFailure, ResourceCapExceeded
from pulse_library import PulseParams, wrap_phase

logger = logging.getLogger(__name__)

Superposition = Sequence[Tuple[BasisState, complex]]


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass
class DenseState:
    """Interaction-picture amplitudes, index = packed bit value of the basis state."""

    amplitudes: np.ndarray
    L: int
    interaction: bool = True

    @classmethod
    def from_superposition(cls, initial: Superposition, L: int) -> "DenseState":
        amplitudes = np.zeros(1 << L, dtype=complex)
        for s, c in initial:
            if len(s) != L:
                raise ContractViolation(f"state {s} has {len(s)} spins, chain has {L}")
            amplitudes[s.bits] += c
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise ContractViolation(f"initial superposition has norm {norm:.12g}, expected 1")
        return cls(amplitudes=amplitudes, L=L)

    def amplitude(self, s: BasisState) -> complex:
        return complex(self.amplitudes[s.bits])

    def probability(self, s: BasisState) -> float:
        return float(abs(self.amplitudes[s.bits]) ** 2)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "DenseState":
        return DenseState(self.amplitudes.copy(), self.L, self.interaction)


@dataclass(frozen=True)
class ErrorMetrics:
    phase_error: float
    common_phase: float
    probability_error: float


@dataclass(frozen=True)
class TraceRecord:
    pulse_index: int
    qpulse_index: int
    cumulative_error: float
    unwanted_count: float
    useful_count: int


@dataclass
class ErrorTrace:
    records: List[TraceRecord] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


TRACE_COLUMNS = ("pulse_index", "qpulse_index", "cumulative_error", "unwanted_count", "useful_count")


def write_trace_csv(path: str, trace: ErrorTrace, header: Optional[Dict[str, object]] = None,
                    extra: Optional[Dict[str, Sequence[float]]] = None):
    """CSV with '# key=value' provenance lines followed by one row per record."""
    extra = extra or {}
    with open(path, "w", newline="") as f:
        for key, value in {**trace.meta, **(header or {})}.items():
            f.write(f"# {key}={value}\n")
        writer = csv.writer(f)
        writer.writerow(list(TRACE_COLUMNS) + list(extra))
        for i, r in enumerate(trace.records):
            row = [r.pulse_index, r.qpulse_index, f"{r.cumulative_error:.12e}",
                   f"{r.unwanted_count:.6g}", r.useful_count]
            row += [f"{values[i]:.12e}" for values in extra.values()]
            writer.writerow(row)


# =============================================================================
# HAMILTONIAN AND PROPAGATOR
# =============================================================================

def check_cap(L: int, cap: int = EXACT_MAX_SPINS):
    if L > cap:
        raise ResourceCapExceeded(
            f"exact simulation of L={L} spins exceeds the cap of {cap} "
            f"(2^{L} amplitudes); use the map engine or raise ADDER_EXACT_MAX_SPINS"
        )


def rotating_hamiltonian(p: ChainParams, rabi: float, nu: float, phi: float = 0.0) -> np.ndarray:
    """
    Rotating-frame Hamiltonian as a dense matrix.

    Diagonal: H0 with omega_k -> omega_k - nu. Off-diagonal, between states
    differing in spin k only: <n_k=1|H|n_k=0> = -(Omega/2) e^{-i phi}.
    """
    dim = 1 << p.L
    diag = energy_vector(p) + nu * magnetization_vector(p.L)
    H = np.diag(diag).astype(complex)
    index = np.arange(dim)
    coupling = -0.5 * rabi * np.exp(-1j * phi)
    for k in range(p.L):
        lower = index[((index >> k) & 1) == 0]
        upper = lower | (1 << k)
        H[upper, lower] = coupling
        H[lower, upper] = np.conj(coupling)
    return H


class PropagatorCache:
    """LRU store of eigendecompositions of H_r(0), keyed by (Omega, nu)."""

    def __init__(self, p: ChainParams, max_entries: int = EIG_CACHE_SIZE):
        self.p = p
        self.max_entries = max(1, max_entries)
        self._store: "OrderedDict[Tuple[float, float], Tuple[np.ndarray, np.ndarray]]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, rabi: float, nu: float) -> Tuple[np.ndarray, np.ndarray]:
        key = (rabi, nu)
        if key in self._store:
            self._store.move_to_end(key)
            self.hits += 1
            return self._store[key]
        self.misses += 1
        H0 = rotating_hamiltonian(self.p, rabi, nu, 0.0).real
        w, V = eigh(H0)
        self._store[key] = (w, V)
        if len(self._store) > self.max_entries:
            self._store.popitem(last=False)
        logger.debug("eigh for Omega=%.6g nu=%.6g (cache size %d)", rabi, nu, len(self._store))
        return w, V


class ExactEngine:
    """Owns the diagonal vectors and propagator cache for one chain."""

    def __init__(self, p: ChainParams, method: str = "eigh", cap: int = EXACT_MAX_SPINS,
                 cache_size: int = EIG_CACHE_SIZE):
        check_cap(p.L, cap)
        if method not in ("eigh", "expm"):
            raise ContractViolation(f"unknown propagation method '{method}'")
        self.p = p
        self.method = method
        self.energies = energy_vector(p)
        self.magnetization = magnetization_vector(p.L)
        self.cache = PropagatorCache(p, cache_size)

    def _rotating_propagate(self, c: np.ndarray, pulse: PulseParams) -> np.ndarray:
        if self.method == "expm":
            H = rotating_hamiltonian(self.p, pulse.rabi, pulse.nu, pulse.phi)
            return expm(-1j * pulse.tau * H) @ c
        w, V = self.cache.get(pulse.rabi, pulse.nu)
        gauge = np.exp(1j * pulse.phi * self.magnetization)
        x = V.T @ (np.conj(gauge) * c)
        x *= np.exp(-1j * w * pulse.tau)
        return gauge * (V @ x)

    def apply(self, state: DenseState, pulse: PulseParams) -> DenseState:
        if state.L != self.p.L:
            raise ContractViolation(f"state has {state.L} spins, chain has {self.p.L}")
        if pulse.tau == 0.0:
            return state.copy()
        Er = self.energies + pulse.nu * self.magnetization
        c = np.exp(-1j * Er * pulse.t0) * state.amplitudes
        c = self._rotating_propagate(c, pulse)
        c = np.exp(1j * Er * pulse.t_end) * c
        drift = abs(np.linalg.norm(c) - state.norm())
        if drift > NORM_TOLERANCE:
            raise InvariantFailure(f"norm changed by {drift:.3g} in pulse at t0={pulse.t0}")
        return DenseState(c, state.L, True)


# =============================================================================
# OPERATIONS
# =============================================================================

def apply_pulse_exact(state: DenseState, pulse: PulseParams, p: ChainParams,
                      engine: Optional[ExactEngine] = None) -> DenseState:
    engine = engine or ExactEngine(p)
    return engine.apply(state, pulse)


def _useful_probability_error(state: DenseState, initial: Superposition,
                              targets: Sequence[BasisState]) -> float:
    return sum(abs(state.probability(g) - abs(c) ** 2) for (_, c), g in zip(initial, targets))


def run_exact(initial: Superposition, protocol: Protocol, p: ChainParams,
              engine: Optional[ExactEngine] = None) -> DenseState:
    state, _ = run_exact_traced(initial, protocol, p, engine=engine, record=False)
    return state


def run_exact_traced(initial: Superposition, protocol: Protocol, p: ChainParams,
                     engine: Optional[ExactEngine] = None, record: bool = True,
                     count_threshold: float = 0.0) -> Tuple[DenseState, ErrorTrace]:
    """
    Apply every scheduled pulse; optionally record the probability error at
    each Q-pulse boundary against the ideal intermediate states.
    """
    engine = engine or ExactEngine(p)
    state = DenseState.from_superposition(initial, p.L)
    trajectories = [ideal_trajectory(s, protocol.qpulses) for s, _ in initial]
    trace = ErrorTrace(meta={"engine": "exact", "L": p.L, "A": protocol.A})

    ends = protocol.qpulse_starts[1:] + [len(protocol.schedule)]
    q = 0
    for i, pulse in enumerate(protocol.schedule):
        state = engine.apply(state, pulse)
        if q < len(ends) and i + 1 == ends[q]:
            q += 1
            if not record:
                continue
            targets = [traj[q] for traj in trajectories]
            useful = {t.bits for t in targets}
            probs = np.abs(state.amplitudes) ** 2
            mask = probs > count_threshold
            mask[list(useful)] = False
            trace.records.append(TraceRecord(
                pulse_index=i + 1,
                qpulse_index=q,
                cumulative_error=_useful_probability_error(state, initial, targets),
                unwanted_count=int(mask.sum()),
                useful_count=len(useful),
            ))
    logger.info("Exact run L=%d A=%d finished: %d pulses, eigh cache %d hits / %d misses",
                p.L, protocol.A, len(protocol.schedule), engine.cache.hits, engine.cache.misses)
    return state, trace


def _mapping(initial: Superposition, A: int, l: int) -> List[Tuple[BasisState, complex, BasisState]]:
    return [(s, c, ideal_action(s, A, l)) for s, c in initial]


def phase_error(initial: Superposition, final: DenseState, A: int, l: int) -> ErrorMetrics:
    """Spread of the phase shifts of the useful states around their mean."""
    shifts = []
    for s, c0, g in _mapping(initial, A, l):
        cg = final.amplitude(g)
        if abs(cg) < DEGENERATE_AMPLITUDE or abs(c0) < DEGENERATE_AMPLITUDE:
            raise DegenerateAmplitudeError(
                f"|C| of {g} is {abs(cg):.3g}; its phase is undefined"
            )
        shifts.append(wrap_phase(np.angle(cg) - np.angle(c0)))

    # Mean on the circle, anchored at the first shift so wrapping cannot split the cluster
    anchor = shifts[0]
    deviations = [wrap_phase(x - anchor) for x in shifts]
    mean = wrap_phase(anchor + sum(deviations) / len(deviations))
    spread = max(abs(wrap_phase(x - mean)) for x in shifts)
    return ErrorMetrics(
        phase_error=spread,
        common_phase=mean,
        probability_error=probability_error_exact(initial, final, A, l),
    )


def probability_error_exact(initial: Superposition, final: DenseState, A: int, l: int) -> float:
    return float(sum(abs(final.probability(g) - abs(c0) ** 2) for _, c0, g in _mapping(initial, A, l)))


def flip_probability(p: ChainParams, pulses: Iterable[PulseParams], start: BasisState, k: int,
                     engine: Optional[ExactEngine] = None) -> Tuple[float, complex, complex]:
    """
    Run pulses from a single basis state; return the probability of spin k
    being flipped plus the final amplitudes of the unflipped and flipped states.
    """
    engine = engine or ExactEngine(p)
    state = DenseState.from_superposition([(start, 1.0)], p.L)
    for pulse in pulses:
        state = engine.apply(state, pulse)
    flipped = start.flip(k)
    return state.probability(flipped), state.amplitude(start), state.amplitude(flipped)


def common_phase_distance(measured: float, expected: float) -> float:
    return abs(wrap_phase(measured - expected))
