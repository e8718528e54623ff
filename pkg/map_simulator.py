"""
Map Simulator Module
Quantum-map engine for long chains: every Q-pulse maps useful states to
useful states by the resonant-flip rule, moves unwanted states by the same
rule, and feeds new unwanted states from the analytic nonresonant amplitudes.
Small entries are pruned and the useful amplitudes are renormalized after
every Q-pulse.

Unwanted states are keyed globally. Each one lives in the ledger of a single
useful branch, stored as a flip mask relative to that branch's current
useful state, so a Q-pulse on spin k only touches masks near k. A new
amplitude that lands on an unwanted state of another branch is added to it
there, and one that lands on a useful state is folded into that amplitude.

Two phase models: "random" draws a uniform phase for every new amplitude;
"analytic" keeps the first-order amplitude with its full phase (pulse start
time, carrier phase) and lets every state carry the tabulated phase it
acquires, so contributions of successive pulses interfere as they do in the
exact evolution.
"""
import cmath
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from adder_compiler import Protocol, ideal_action
from chain_model import BasisState, ChainParams
from config import DEFAULT_SEED, PHASE_MODEL, TAIL_FACTOR, WORKERS, XI_FACTOR
from errors import ContractViolation, DomainError, InvariantFailure
from exact_simulator import ErrorTrace, TraceRecord
from pulse_library import (
    AuxiliaryConstants,
    PulseParams,
    QPulse,
    QPulseKind,
    acquired_phase,
    local_pattern,
    resonant_flip,
)
from random_streams import random_phases, realization_stream

logger = logging.getLogger(__name__)

NORM_CHECK = 1e-9

PhaseModel = Literal["random", "analytic"]


# =============================================================================
# CONFIGURATION
# =============================================================================

class MapConfig(BaseModel):
    """Options of the map engine."""

    xi_factor: float = Field(default=XI_FACTOR, gt=0)
    tail_factor: float = Field(default=TAIL_FACTOR, ge=0, le=1)
    realizations: int = Field(default=1, ge=1)
    rng_seed: int = Field(default=DEFAULT_SEED, ge=0)
    track_counts: bool = True
    workers: int = Field(default=WORKERS, ge=1)
    phase_model: PhaseModel = PHASE_MODEL


def pruning_threshold(xi_factor: float, aux: AuxiliaryConstants, p: ChainParams, M: int) -> float:
    """xi = xi_factor * (Omega / delta_omega)^2 / M."""
    return xi_factor * (aux.Omega / p.delta_omega) ** 2 / M


# =============================================================================
# FLIP MASKS
# =============================================================================

# key = (pattern << MASK_SHIFT) | lo, pattern bit 0 is spin lo
MASK_SHIFT = 20
_LO_BITS = (1 << MASK_SHIFT) - 1


def mask_key(positions: Iterable[int]) -> int:
    positions = list(positions)
    if not positions:
        raise ContractViolation("a flip mask needs at least one spin")
    lo = min(positions)
    pattern = 0
    for x in positions:
        pattern ^= 1 << (x - lo)
    return (pattern << MASK_SHIFT) | lo


def mask_from_bits(bits: int) -> int:
    """Key of the mask whose packed spin bitfield is `bits`."""
    if bits <= 0:
        raise ContractViolation("a flip mask needs at least one spin")
    lo = (bits & -bits).bit_length() - 1
    return ((bits >> lo) << MASK_SHIFT) | lo


def mask_positions(key: int) -> List[int]:
    lo = key & _LO_BITS
    pattern = key >> MASK_SHIFT
    positions = []
    while pattern:
        if pattern & 1:
            positions.append(lo)
        pattern >>= 1
        lo += 1
    return positions


def mask_weight(key: int) -> int:
    return bin(key >> MASK_SHIFT).count("1")


def mask_has(key: int, x: int) -> int:
    lo = key & _LO_BITS
    return (key >> (MASK_SHIFT + x - lo)) & 1 if x >= lo else 0


def mask_toggle(key: int, x: int) -> int:
    lo = key & _LO_BITS
    pattern = key >> MASK_SHIFT
    if x >= lo:
        pattern ^= 1 << (x - lo)
    else:
        pattern = (pattern << (lo - x)) | 1
        lo = x
    if pattern == 0:
        raise InvariantFailure("an unwanted state collapsed onto its useful state")
    shift = (pattern & -pattern).bit_length() - 1
    return ((pattern >> shift) << MASK_SHIFT) | (lo + shift)


def mask_bits(key: int) -> int:
    """The mask as a packed spin bitfield."""
    return (key >> MASK_SHIFT) << (key & _LO_BITS)


def _single(x: int) -> int:
    return (1 << MASK_SHIFT) | x


def _pair(k: int, x: int) -> int:
    lo = min(k, x)
    return ((1 | (1 << abs(k - x))) << MASK_SHIFT) | lo


# =============================================================================
# LEDGER
# =============================================================================

class BranchLedger:
    """
    One useful state and the unwanted states it holds.

    `phase` is the phase of the useful amplitude; entry values are stored
    relative to it. It stays 0 under the random phase model.
    """

    __slots__ = ("state", "bits", "amplitude", "phase", "entries", "by_position",
                 "probability", "max_weight")

    def __init__(self, state: BasisState, amplitude: float):
        self.state = state
        self.bits = state.to_array()
        self.amplitude = float(amplitude)
        self.phase = 0.0
        self.entries: Dict[int, complex] = {}
        self.by_position: Dict[int, Set[int]] = defaultdict(set)
        self.probability = 0.0
        self.max_weight = 0

    def _index(self, key: int):
        for x in mask_positions(key):
            self.by_position[x].add(key)
        self.max_weight = max(self.max_weight, mask_weight(key))

    def _unindex(self, key: int):
        for x in mask_positions(key):
            keys = self.by_position[x]
            keys.discard(key)
            if not keys:
                del self.by_position[x]

    def add(self, key: int, value: complex, xi: float) -> bool:
        old = self.entries.get(key)
        if old is None:
            weight = abs(value) ** 2
            if weight < xi:
                return False
            self.entries[key] = value
            self._index(key)
            self.probability += weight
            return True
        new = old + value
        self.entries[key] = new
        self.probability += abs(new) ** 2 - abs(old) ** 2
        return True

    def prune(self, keys: Iterable[int], xi: float):
        for key in keys:
            value = self.entries.get(key)
            if value is not None and abs(value) ** 2 < xi:
                del self.entries[key]
                self._unindex(key)
                self.probability -= abs(value) ** 2

    def _masked_pattern(self, key: int, k: int) -> Tuple[int, ...]:
        L = len(self.bits)

        def bit(y: int) -> int:
            return int(self.bits[y]) ^ mask_has(key, y)

        if k == 0:
            return (bit(1), bit(0))
        if k == L - 1:
            return (bit(L - 2), bit(L - 1))
        return (bit(k + 1), bit(k), bit(k - 1))

    def evolve_unwanted(self, kind: QPulseKind, k: int, flip_useful: bool,
                        phi: float = 0.0, aux: Optional[AuxiliaryConstants] = None):
        """
        Apply the resonant rule to every unwanted state (call before flipping
        the useful state). With `aux`, entries whose pattern at k differs from
        the useful one also take the difference of the tabulated phases, and
        the useful phase advances by its own.
        """
        L = len(self.bits)
        positions = (k - 1, k, k + 1) if aux is not None else (k - 1, k + 1)
        candidates: Set[int] = set()
        for x in positions:
            if 0 <= x < L and x in self.by_position:
                candidates |= self.by_position[x]

        base = 0.0
        if aux is not None:
            base, _ = acquired_phase(kind, local_pattern(self.state, k), phi, aux)
        moved = []
        for key in candidates:
            pattern = self._masked_pattern(key, k)
            if aux is None:
                flip = resonant_flip(kind, pattern)
            else:
                phase, flip = acquired_phase(kind, pattern, phi, aux)
                if phase != base:
                    self.entries[key] *= cmath.exp(1j * (phase - base))
            if flip != flip_useful:
                moved.append(key)

        values = [(mask_toggle(key, k), self.entries.pop(key)) for key in moved]
        for key in moved:
            self._unindex(key)
        for key, value in values:
            self.entries[key] = value
            self._index(key)
        self.phase += base

    def flip_useful(self, k: int):
        self.state = self.state.flip(k)
        self.bits[k] ^= 1

    def unwanted_states(self) -> Iterable[Tuple[BasisState, complex]]:
        """Unwanted states with their amplitudes in the common frame."""
        L = len(self.bits)
        turn = cmath.exp(1j * self.phase)
        for key, value in self.entries.items():
            yield BasisState(self.state.bits ^ mask_bits(key), L), value * turn


class StateLedger:
    """Useful states with real amplitudes plus the unwanted states, keyed globally."""

    def __init__(self, initial: Sequence[Tuple[BasisState, float]], xi: float,
                 phases: Optional[Sequence[float]] = None):
        if not initial:
            raise ContractViolation("the ledger needs at least one useful state")
        states = [s for s, _ in initial]
        if len(set(states)) != len(states):
            raise ContractViolation("useful states must be distinct")
        weights = 0.0
        for s, a in initial:
            if isinstance(a, complex) or a < 0:
                raise ContractViolation(f"useful amplitude of {s} must be real and >= 0, got {a}")
            weights += a * a
        if abs(weights - 1.0) > NORM_CHECK:
            raise ContractViolation(f"useful amplitudes have norm^2 {weights:.12g}, expected 1")
        if xi <= 0:
            raise DomainError(f"pruning threshold must be positive, got {xi}")
        self.branches = [BranchLedger(s, a) for s, a in initial]
        if phases is not None:
            if len(phases) != len(self.branches):
                raise ContractViolation(f"{len(phases)} phases for {len(self.branches)} useful states")
            for b, phase in zip(self.branches, phases):
                b.phase = float(phase)
        self.xi = xi
        self.total_error = 0.0
        self.folds = 0

        # Hamming distances between useful states; an insertion can only meet
        # a branch whose useful state lies within the mask weights of both
        M = len(self.branches)
        self._distance = np.zeros((M, M), dtype=np.int64)
        for a in range(M):
            for b in range(a + 1, M):
                d = bin(states[a].bits ^ states[b].bits).count("1")
                self._distance[a, b] = self._distance[b, a] = d

    @property
    def useful(self) -> List[Tuple[BasisState, float]]:
        return [(b.state, b.amplitude) for b in self.branches]

    def unwanted(self) -> Dict[BasisState, complex]:
        """Materialized unwanted map; no state appears twice or as a useful state."""
        return {s: value for b in self.branches for s, value in b.unwanted_states()}

    def unwanted_count(self) -> int:
        return sum(len(b.entries) for b in self.branches)

    def norm_squared(self) -> float:
        return sum(b.amplitude ** 2 for b in self.branches) + self.total_error

    def flip_useful(self, k: int, flips: Sequence[bool]):
        """Flip spin k of the flagged useful states and keep the distances current."""
        before = np.array([b.bits[k] for b in self.branches], dtype=np.int64)
        after = before ^ np.asarray(flips, dtype=np.int64)
        for b, flip in zip(self.branches, flips):
            if flip:
                b.flip_useful(k)
        self._distance += ((after[:, None] != after[None, :]).astype(np.int64)
                           - (before[:, None] != before[None, :]).astype(np.int64))

    def near(self, index: int, reach: int) -> List[int]:
        if len(self.branches) == 1:
            return []
        hits = np.nonzero(self._distance[index] <= reach)[0]
        return [int(j) for j in hits if j != index]

    def reach(self) -> int:
        """Largest distance at which a new single or double flip can meet another branch."""
        # entries added during the step carry masks of weight <= 2
        return 2 + max(2, max(b.max_weight for b in self.branches))

    def insert(self, index: int, key: int, value: complex,
               near: Sequence[int]) -> Optional[Tuple[int, int]]:
        """
        Add an amplitude keyed relative to branch `index`. Returns the
        (branch, key) that now holds it, or None when it was folded into a
        useful amplitude or fell below the threshold.
        """
        owner = self.branches[index]
        target = owner.state.bits ^ mask_bits(key)
        for j in near:
            other = self.branches[j]
            offset = target ^ other.state.bits
            shifted = value * cmath.exp(1j * (owner.phase - other.phase))
            if offset == 0:
                # The frame phase of the receiving branch is left as is
                other.amplitude = abs(other.amplitude + shifted)
                self.folds += 1
                return None
            other_key = mask_from_bits(offset)
            if other_key in other.entries:
                other.add(other_key, shifted, self.xi)
                return j, other_key
        if owner.add(key, value, self.xi):
            return index, key
        return None


# =============================================================================
# NONRESONANT AMPLITUDES
# =============================================================================

@dataclass(frozen=True)
class TransitionParams:
    eta: int
    delta: float
    Delta: float
    D: float
    sigma: int
    lam: float
    Lam: float


def _flip_energies(bits: np.ndarray, k: int, p: ChainParams, kp: np.ndarray):
    """E(i with k flipped) - E(i), the same in m = i with k' flipped, and E(m) - E(i)."""
    J = p.J
    z = 0.5 - bits.astype(float)
    zp = np.zeros(len(z) + 2)
    zp[1:-1] = z
    omega = p.larmor_array()

    def flip_energy(x):
        return 2.0 * z[x] * (omega[x] + 2.0 * J * (zp[x] + zp[x + 2]))

    dE_k = float(flip_energy(k))
    adjacent = np.abs(kp - k) == 1
    shift = np.where(adjacent, 8.0 * J * z[k] * z[kp], 0.0)
    return dE_k, dE_k - shift, flip_energy(kp), shift


def _transition_arrays(bits: np.ndarray, k: int, pulse: PulseParams, p: ChainParams,
                       kp: np.ndarray):
    """eta, delta, Delta, D and sigma for driven spin k and every spin in kp."""
    dE_k, dE_k_m, dE_kp, shift = _flip_energies(bits, k, p, kp)
    sigma = np.where(bits[kp] == 0, 1, -1)
    nu = pulse.nu
    if bits[k] == 0:
        eta = 1
        delta = dE_k - nu
        Delta = dE_k_m - nu
        base = dE_kp
    else:
        eta = -1
        delta = -dE_k - nu
        Delta = -dE_k_m - nu
        base = dE_kp - shift
    D = base - sigma * nu + 0.5 * (Delta - delta)
    return eta, delta, Delta, D, sigma


def _check_detuning(D: np.ndarray, k: int):
    if np.any(np.abs(D) < 1e-12):
        raise InvariantFailure(f"vanishing large detuning for a pulse on spin {k}")


def _magnitudes(bits: np.ndarray, k: int, pulse: PulseParams, p: ChainParams,
                kp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """|C_m| (spin k' flipped) and |C_n| (spins k and k' flipped) at the end of the pulse."""
    eta, delta, Delta, D, _ = _transition_arrays(bits, k, pulse, p, kp)
    _check_detuning(D, k)
    rabi, tau = pulse.rabi, pulse.tau
    lam = math.hypot(rabi, delta)
    Lam = np.hypot(rabi, Delta)
    carrier = np.exp(1j * D * tau)
    driven = math.cos(0.5 * lam * tau) + 1j * eta * delta / lam * math.sin(0.5 * lam * tau)
    prefactor = rabi / (2.0 * np.abs(D))
    c_m = prefactor * np.abs(np.cos(0.5 * Lam * tau) - driven * carrier)
    c_n = prefactor * np.abs(rabi / Lam * np.sin(0.5 * Lam * tau)
                             - rabi / lam * math.sin(0.5 * lam * tau) * carrier)
    return c_m, c_n


def _stay(x, rabi: float, tau: float):
    """Amplitude left in a state whose spin k is detuned by x = E(flip k) - E - eta*nu."""
    lam = np.hypot(rabi, x)
    return np.exp(-0.5j * x * tau) * (np.cos(0.5 * lam * tau) + 1j * x / lam * np.sin(0.5 * lam * tau))


def _amplitudes(bits: np.ndarray, k: int, pulse: PulseParams, p: ChainParams,
                kp: np.ndarray, flips: bool) -> Tuple[np.ndarray, np.ndarray, complex]:
    """
    Complex C_m and C_n at the end of the pulse for a source with unit
    amplitude at pulse.t0, in the interaction picture of H0, plus the
    source's own amplitude at the end (in the flipped state if `flips`).
    """
    eta, delta, Delta, D, sigma = _transition_arrays(bits, k, pulse, p, kp)
    _check_detuning(D, k)
    rabi, tau, phi, t0 = pulse.rabi, pulse.tau, pulse.phi, pulse.t0
    t1 = t0 + tau
    lam = math.hypot(rabi, delta)
    Lam = np.hypot(rabi, Delta)

    stay = complex(_stay(eta * delta, rabi, tau))
    flip = cmath.exp(1j * eta * (delta * (t0 + 0.5 * tau) - phi)) * 1j * rabi / lam * math.sin(0.5 * lam * tau)
    stay_m = _stay(eta * Delta, rabi, tau)
    to_n = np.exp(1j * eta * (Delta * (t0 + 0.5 * tau) - phi)) * 1j * rabi / Lam * np.sin(0.5 * Lam * tau)

    eps_m = D - 0.5 * eta * (Delta - delta)
    eps_n = D + 0.5 * eta * (Delta - delta)
    scale = rabi / (2.0 * D) * np.exp(-1j * sigma * phi)
    start = np.exp(1j * eps_m * t0)
    c_m = scale * (np.exp(1j * eps_m * t1) * stay - stay_m * start)
    c_n = scale * (np.exp(1j * eps_n * t1) * flip - to_n * start)
    return c_m, c_n, (flip if flips else stay)


def _transport(bits: np.ndarray, k: int, p: ChainParams, kp: np.ndarray, flipped: bool,
               later: Sequence[PulseParams]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Phase factors the remaining sub-pulses of a Q-pulse give the new m and n
    states, relative to the useful state.
    """
    factor_m = np.ones(len(kp), dtype=complex)
    factor_n = np.ones(len(kp), dtype=complex)
    if not later:
        return factor_m, factor_n
    dE_k, dE_k_m, _, _ = _flip_energies(bits, k, p, kp)
    eta = 1 if bits[k] == 0 else -1
    for pulse in later:
        x_u = dE_k - eta * pulse.nu
        x_m = dE_k_m - eta * pulse.nu
        useful = complex(_stay(-x_u if flipped else x_u, pulse.rabi, pulse.tau))
        turn = useful.conjugate() / (abs(useful) or 1.0)
        factor_m *= _stay(x_m, pulse.rabi, pulse.tau) * turn
        factor_n *= _stay(-x_m, pulse.rabi, pulse.tau) * turn
    return factor_m, factor_n


def transition_params(source: BasisState, k: int, kprime: int, pulse: PulseParams,
                      p: ChainParams) -> TransitionParams:
    if kprime == k:
        raise DomainError("k' must differ from the driven spin")
    kp = np.array([kprime])
    eta, delta, Delta, D, sigma = _transition_arrays(source.to_array(), k, pulse, p, kp)
    return TransitionParams(
        eta=eta, delta=float(delta), Delta=float(Delta[0]), D=float(D[0]), sigma=int(sigma[0]),
        lam=math.hypot(pulse.rabi, delta), Lam=math.hypot(pulse.rabi, float(Delta[0])),
    )


def nonresonant_amplitudes(source: BasisState, k: int, pulse: PulseParams, p: ChainParams,
                           rng: np.random.Generator) -> List[Tuple[BasisState, float, float]]:
    """(state, |C|, random phase) for the single flips at every k' != k and the double flips (k, k')."""
    kp = np.array([x for x in range(p.L) if x != k])
    c_m, c_n = _magnitudes(source.to_array(), k, pulse, p, kp)
    phases = random_phases(rng, 2 * len(kp))
    out = []
    for i, x in enumerate(kp):
        x = int(x)
        out.append((source.flip(x), float(c_m[i]), float(phases[2 * i])))
        out.append((source.flip(k).flip(x), float(c_n[i]), float(phases[2 * i + 1])))
    return out


def _window(k: int, amplitude: float, pulse: PulseParams, p: ChainParams, floor: float) -> np.ndarray:
    """Spins k' whose contribution can reach probability `floor` (|C| <= Omega/|D|)."""
    if floor <= 0:
        lo, hi = 0, p.L - 1
    else:
        reach = amplitude * pulse.rabi / math.sqrt(floor) + 8.0 * p.J
        d = int(math.ceil(reach / p.delta_omega)) + 1
        lo, hi = max(0, k - d), min(p.L - 1, k + d)
    kp = np.arange(lo, hi + 1)
    return kp[kp != k]


def _contributions(branch: BranchLedger, k: int, pulse: PulseParams, p: ChainParams,
                   floor: float, rng: np.random.Generator, flipped: bool,
                   later: Optional[Sequence[PulseParams]] = None) -> List[Tuple[int, complex]]:
    """
    Unwanted amplitudes one physical pulse feeds from a branch, keyed relative
    to the post-pulse useful state. `flipped` marks a source that still has
    spin k in its pre-pulse value. Passing `later` (the remaining sub-pulses
    of the Q-pulse) selects the analytic phases.
    """
    kp = _window(k, branch.amplitude, pulse, p, floor)
    if kp.size == 0 or branch.amplitude == 0.0:
        return []
    bits = branch.bits.copy()
    if flipped:
        bits[k] ^= 1
    if later is None:
        c_m, c_n = _magnitudes(bits, k, pulse, p, kp)
        w_m = branch.amplitude * c_m
        w_n = branch.amplitude * c_n
        sel_m = np.nonzero(w_m * w_m >= floor)[0]
        sel_n = np.nonzero(w_n * w_n >= floor)[0]
        phases = random_phases(rng, sel_m.size + sel_n.size)
        values_m = w_m[sel_m] * np.exp(1j * phases[:sel_m.size])
        values_n = w_n[sel_n] * np.exp(1j * phases[sel_m.size:])
    else:
        c_m, c_n, source = _amplitudes(bits, k, pulse, p, kp, flipped)
        turn = source.conjugate() / (abs(source) or 1.0)
        factor_m, factor_n = _transport(bits, k, p, kp, flipped, later)
        w_m = branch.amplitude * turn * c_m * factor_m
        w_n = branch.amplitude * turn * c_n * factor_n
        sel_m = np.nonzero(np.abs(w_m) ** 2 >= floor)[0]
        sel_n = np.nonzero(np.abs(w_n) ** 2 >= floor)[0]
        values_m = w_m[sel_m]
        values_n = w_n[sel_n]

    out = []
    for x, value in zip(kp[sel_m], values_m):
        x = int(x)
        out.append((_pair(k, x) if flipped else _single(x), complex(value)))
    for x, value in zip(kp[sel_n], values_n):
        x = int(x)
        out.append((_single(x) if flipped else _pair(k, x), complex(value)))
    return out


# =============================================================================
# MAP STEP AND RUNS
# =============================================================================

def map_step(ledger: StateLedger, q: QPulse, pulses: Sequence[PulseParams], p: ChainParams,
             aux: AuxiliaryConstants, rng: np.random.Generator,
             tail_factor: float = TAIL_FACTOR, phase_model: PhaseModel = "random") -> StateLedger:
    """
    One Q-pulse: (a) useful states follow the resonant rule, (b) unwanted
    states follow it too, (c) every physical sub-pulse feeds nonresonant
    amplitudes from every useful state, (d) prune and renormalize.
    """
    if phase_model not in ("random", "analytic"):
        raise DomainError(f"unknown phase model '{phase_model}'")
    analytic = phase_model == "analytic"
    xi = ledger.xi
    floor = tail_factor * xi

    flips = []
    for branch in ledger.branches:
        flip = resonant_flip(q.kind, local_pattern(branch.state, q.k))
        branch.evolve_unwanted(q.kind, q.k, flip, q.phi, aux if analytic else None)
        flips.append(flip)
    ledger.flip_useful(q.k, flips)

    reach = ledger.reach()
    touched: Dict[int, Set[int]] = defaultdict(set)
    for index, (branch, flip) in enumerate(zip(ledger.branches, flips)):
        near = ledger.near(index, reach)
        for i, pulse in enumerate(pulses):
            # The first sub-pulse acts on the pre-pulse state, later ones on the flipped state
            later = pulses[i + 1:] if analytic else None
            for key, value in _contributions(branch, q.k, pulse, p, floor, rng, flip and i == 0, later):
                hit = ledger.insert(index, key, value, near)
                if hit is not None:
                    touched[hit[0]].add(hit[1])
    for index, keys in touched.items():
        ledger.branches[index].prune(keys, xi)

    ledger.total_error = sum(b.probability for b in ledger.branches)
    useful = sum(b.amplitude ** 2 for b in ledger.branches)
    if useful > 0:
        scale = math.sqrt(max(1.0 - ledger.total_error, 0.0) / useful)
        for b in ledger.branches:
            b.amplitude *= scale
    drift = abs(ledger.norm_squared() - 1.0)
    if drift > NORM_CHECK:
        raise InvariantFailure(f"ledger norm drifted by {drift:.3g} after pulse on spin {q.k}")
    return ledger


def run_map(initial: Sequence[Tuple[BasisState, float]], protocol: Protocol, p: ChainParams,
            aux: AuxiliaryConstants, cfg: Optional[MapConfig] = None,
            rng: Optional[np.random.Generator] = None, realization: int = 0,
            phases: Optional[Sequence[float]] = None) -> ErrorTrace:
    """
    One realization over the whole protocol. `phases` are the phases of the
    initial coefficients; only the analytic phase model uses them.
    """
    cfg = cfg or MapConfig()
    rng = rng if rng is not None else realization_stream(cfg.rng_seed, realization)
    for s, _ in initial:
        if len(s) != p.L:
            raise ContractViolation(f"state {s} has {len(s)} spins, chain has {p.L}")
    xi = pruning_threshold(cfg.xi_factor, aux, p, len(initial))
    ledger = StateLedger(initial, xi, phases if cfg.phase_model == "analytic" else None)
    trace = ErrorTrace(meta={
        "engine": "map", "L": p.L, "A": protocol.A, "M": len(initial),
        "xi": f"{xi:.6e}", "seed": cfg.rng_seed, "realization": realization,
        "phase_model": cfg.phase_model,
    })

    ends = protocol.qpulse_starts[1:] + [len(protocol.schedule)]
    for index, (q, start, end) in enumerate(zip(protocol.qpulses, protocol.qpulse_starts, ends), start=1):
        map_step(ledger, q, protocol.schedule[start:end], p, aux, rng, cfg.tail_factor, cfg.phase_model)
        trace.records.append(TraceRecord(
            pulse_index=end,
            qpulse_index=index,
            cumulative_error=ledger.total_error,
            unwanted_count=ledger.unwanted_count() if cfg.track_counts else 0,
            useful_count=len(ledger.branches),
        ))
        if index % 1000 == 0:
            logger.debug("realization %d: %d/%d Q-pulses, error %.4e, %d unwanted states",
                         realization, index, protocol.qpulse_count, ledger.total_error,
                         ledger.unwanted_count())

    if protocol.A >= 0:
        for (s, _), (final, _) in zip(initial, ledger.useful):
            if final != ideal_action(s, protocol.A, protocol.l):
                raise InvariantFailure(f"useful state {s} ended in {final}, not the ideal sum")
    logger.info("Map realization %d done: error %.4e, %d unwanted states, %d folded into useful states",
                realization, ledger.total_error, ledger.unwanted_count(), ledger.folds)
    return trace


def _realization_job(job) -> ErrorTrace:
    initial, protocol, p, aux, cfg, index, phases = job
    return run_map(initial, protocol, p, aux, cfg, realization=index, phases=phases)


def run_realizations(initial: Sequence[Tuple[BasisState, float]], protocol: Protocol,
                     p: ChainParams, aux: AuxiliaryConstants, cfg: MapConfig,
                     phases: Optional[Sequence[float]] = None) -> List[ErrorTrace]:
    """Independent realizations, one spawned random stream each."""
    phases = list(phases) if phases is not None else None
    jobs = [(list(initial), protocol, p, aux, cfg, r, phases) for r in range(cfg.realizations)]
    if cfg.workers <= 1 or cfg.realizations == 1:
        return [_realization_job(job) for job in jobs]
    logger.info("Running %d realizations on %d workers", cfg.realizations, cfg.workers)
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_realization_job, jobs))


# =============================================================================
# AGGREGATION
# =============================================================================

@dataclass
class AggregateTrace:
    pulse_index: np.ndarray
    qpulse_index: np.ndarray
    mean_error: np.ndarray
    se_error: np.ndarray
    mean_unwanted: np.ndarray
    se_unwanted: np.ndarray
    useful_count: np.ndarray
    realizations: int
    meta: Dict[str, object] = field(default_factory=dict)


def aggregate_realizations(runs: Sequence[ErrorTrace]) -> AggregateTrace:
    """Pointwise mean and standard error over realizations."""
    if len(runs) < 2:
        raise DomainError(f"aggregation needs at least 2 realizations, got {len(runs)}")
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise DomainError(f"realizations have different pulse counts: {sorted(lengths)}")
    errors = np.stack([r.column("cumulative_error") for r in runs])
    counts = np.stack([r.column("unwanted_count") for r in runs])
    root = math.sqrt(len(runs))
    return AggregateTrace(
        pulse_index=runs[0].column("pulse_index").astype(int),
        qpulse_index=runs[0].column("qpulse_index").astype(int),
        mean_error=errors.mean(axis=0),
        se_error=errors.std(axis=0, ddof=1) / root,
        mean_unwanted=counts.mean(axis=0),
        se_unwanted=counts.std(axis=0, ddof=1) / root,
        useful_count=runs[0].column("useful_count").astype(int),
        realizations=len(runs),
        meta=dict(runs[0].meta),
    )


def random_walk_growth(magnitude: float, steps: int, realizations: int,
                       rng: np.random.Generator) -> np.ndarray:
    """
    Mean |sum of n contributions|^2 for n = 1..steps, each contribution of
    fixed magnitude and uniform random phase. Grows as n * magnitude^2.
    """
    if steps < 1 or realizations < 1:
        raise DomainError("steps and realizations must be positive")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(realizations, steps))
    walks = np.cumsum(magnitude * np.exp(1j * phases), axis=1)
    return (np.abs(walks) ** 2).mean(axis=0)
