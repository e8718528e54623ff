"""
Tests for the exact state-vector engine on short chains.
"""
import math
import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from adder_compiler import compile_full_adder, expected_global_phase
from chain_model import BasisState, ChainParams, encode_addend_register
from errors import ContractViolation, DegenerateAmplitudeError, ResourceCapExceeded
from exact_simulator import (
    DenseState,
    ExactEngine,
    PropagatorCache,
    apply_pulse_exact,
    common_phase_distance,
    flip_probability,
    phase_error,
    probability_error_exact,
    rotating_hamiltonian,
    run_exact,
    run_exact_traced,
    write_trace_csv,
)
from pulse_library import PulseParams, QPulse, QPulseKind, acquired_phase, compute_aux, expand, wrap_phase

PHASE_BOUND = 0.01 * math.pi


def fig1_chain(l, K=8):
    aux = compute_aux(K)
    return aux, ChainParams(l=l, delta_omega=1.0e4 * aux.Omega)


def uniform(numbers, l):
    c = 1.0 / math.sqrt(len(numbers))
    return [(encode_addend_register(B, l), c) for B in numbers]


def test_hamiltonian_structure():
    p = ChainParams(l=1, delta_omega=100.0)
    H = rotating_hamiltonian(p, rabi=0.2, nu=100.0, phi=0.7)
    assert np.allclose(H, H.conj().T)
    # <n_k=1|H|n_k=0> = -(Omega/2) e^{-i phi}
    assert H[0b010, 0b000] == pytest.approx(-0.1 * np.exp(-0.7j))
    assert H[0b011, 0b000] == 0


def test_dense_state():
    state = DenseState.from_superposition([(BasisState.from_string("001"), 0.6),
                                          (BasisState.from_string("100"), 0.8j)], 3)
    assert state.probability(BasisState.from_string("100")) == pytest.approx(0.64)
    assert state.norm() == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        DenseState.from_superposition([(BasisState.from_string("001"), 0.5)], 3)
    with pytest.raises(ContractViolation):
        DenseState.from_superposition([(BasisState.from_string("01"), 1.0)], 3)


def test_resource_cap():
    with pytest.raises(ResourceCapExceeded):
        ExactEngine(ChainParams(l=7, delta_omega=100.0))
    with pytest.raises(ResourceCapExceeded):
        ExactEngine(ChainParams(l=2, delta_omega=100.0), cap=4)
    with pytest.raises(ContractViolation):
        ExactEngine(ChainParams(l=1, delta_omega=100.0), method="pade")


def test_eigh_matches_expm():
    aux = compute_aux(8)
    p = ChainParams(l=1, delta_omega=100.0)
    start = DenseState.from_superposition([(BasisState.from_string("010"), 0.6),
                                          (BasisState.from_string("011"), 0.8)], p.L)
    pulses = expand(QPulse(QPulseKind.Q00, 1, 0.4), aux, p, 3.3)
    a = b = start
    fast = ExactEngine(p, method="eigh")
    slow = ExactEngine(p, method="expm")
    for pulse in pulses:
        a = fast.apply(a, pulse)
        b = slow.apply(b, pulse)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-9
    assert a.norm() == pytest.approx(1.0, abs=1e-12)


def test_propagator_cache():
    p = ChainParams(l=1, delta_omega=100.0)
    cache = PropagatorCache(p, max_entries=2)
    cache.get(0.1, 100.0)
    cache.get(0.1, 100.0)
    cache.get(0.1, 200.0)
    cache.get(0.1, 0.0)
    assert (cache.hits, cache.misses) == (1, 3)
    cache.get(0.1, 100.0)
    assert cache.misses == 4


def test_resonant_flip():
    aux, p = fig1_chain(1)
    # spin 1 between a 1 and a 0: Q01 flips it
    start = BasisState.from_string("001")
    prob, _, moved = flip_probability(p, expand(QPulse(QPulseKind.Q01, 1, 0.3), aux, p, 0.0), start, 1)
    assert prob > 0.999
    assert np.angle(moved) == pytest.approx(math.pi / 2 - 0.3, abs=1e-3)
    # both neighbours 0: the 2 pi K condition brings it back
    prob, stay, _ = flip_probability(p, expand(QPulse(QPulseKind.Q01, 1, 0.3), aux, p, 0.0),
                                     BasisState.from_string("000"), 1)
    assert prob < 1e-6
    assert abs(stay) > 0.999


def test_edge1_flip_phase_sign():
    aux, p = fig1_chain(1)
    phi = 0.3
    for k in (0, 2):
        # neighbour set: 0 -> 1 acquires pi/2 - phi, 1 -> 0 acquires pi/2 + phi
        for n_k, sign in ((0, -1), (1, 1)):
            bits = [0, 1, 0]
            bits[k] = n_k
            pulses = expand(QPulse(QPulseKind.Q1EDGE, k, phi), aux, p, 0.0)
            prob, _, moved = flip_probability(p, pulses, BasisState.from_bits(bits), k)
            expected, flip = acquired_phase(QPulseKind.Q1EDGE, (1, n_k), phi, aux)
            assert flip and prob > 0.999
            assert expected == pytest.approx(wrap_phase(math.pi / 2 + sign * phi))
            assert abs(wrap_phase(np.angle(moved) - expected)) < 1e-3


def test_apply_pulse_exact():
    aux, p = fig1_chain(1)
    start = DenseState.from_superposition([(BasisState.from_string("001"), 1.0)], p.L)
    [pulse] = expand(QPulse(QPulseKind.Q01, 1, 0.0), aux, p, 0.0)
    end = apply_pulse_exact(start, pulse, p)
    assert end.probability(BasisState.from_string("011")) > 0.999
    assert end.norm() == pytest.approx(1.0, abs=1e-12)
    assert start.probability(BasisState.from_string("001")) == 1.0


def test_frame_gauge():
    aux, p = fig1_chain(1)
    engine = ExactEngine(p)
    start = DenseState.from_superposition([(BasisState.from_string("001"), 1.0)], p.L)
    nu = p.larmor(1)
    tau = math.pi / aux.Omega
    shift = 0.37
    a = engine.apply(start, PulseParams(rabi=aux.Omega, nu=nu, tau=tau, phi=0.4, t0=1.0))
    b = engine.apply(start, PulseParams(rabi=aux.Omega, nu=nu, tau=tau, phi=0.4 - nu * shift, t0=1.0 + shift))
    assert np.allclose(np.abs(a.amplitudes) ** 2, np.abs(b.amplitudes) ** 2, atol=1e-9)


def test_full_adder_is_phase_corrected():
    l = 2
    aux, p = fig1_chain(l)
    initial = uniform([0, 1, 2, 3], l)
    engine = ExactEngine(p)
    for A in range(1 << l):
        protocol = compile_full_adder(A, l, aux, p)
        final = run_exact(initial, protocol, p, engine)
        metrics = phase_error(initial, final, A, l)
        assert metrics.phase_error < PHASE_BOUND, (A, metrics)
        expected = expected_global_phase(protocol)
        assert common_phase_distance(metrics.common_phase, expected) < PHASE_BOUND
    assert engine.cache.hits > 0


def test_single_state_probability_error():
    # useful states of a superposition interfere through their leaked
    # amplitudes, so the per-state bound is checked one input at a time
    l = 2
    aux, p = fig1_chain(l)
    engine = ExactEngine(p)
    for A in range(1 << l):
        protocol = compile_full_adder(A, l, aux, p)
        bound = 2.0 * protocol.physical_pulse_count * (aux.Omega / p.delta_omega) ** 2
        for B in range(1 << l):
            initial = [(encode_addend_register(B, l), 1.0)]
            final = run_exact(initial, protocol, p, engine)
            assert probability_error_exact(initial, final, A, l) < bound, (A, B)


def test_traced_run():
    l = 2
    aux, p = fig1_chain(l)
    initial = uniform([1, 2], l)
    protocol = compile_full_adder(3, l, aux, p)
    final, trace = run_exact_traced(initial, protocol, p, count_threshold=1e-12)
    assert len(trace) == protocol.qpulse_count
    assert trace.records[-1].pulse_index == protocol.physical_pulse_count
    assert [r.qpulse_index for r in trace.records] == list(range(1, protocol.qpulse_count + 1))
    assert trace.records[-1].cumulative_error == pytest.approx(
        probability_error_exact(initial, final, 3, l), abs=1e-12)
    assert all(r.useful_count == 2 for r in trace.records)
    assert np.all(trace.column("cumulative_error") < 1e-4)

    path = os.path.join(tempfile.mkdtemp(), "trace.csv")
    write_trace_csv(path, trace, header={"K": 8})
    with open(path) as f:
        lines = f.read().splitlines()
    assert "# engine=exact" in lines
    assert "# K=8" in lines
    assert lines[len(trace.meta) + 1].startswith("pulse_index,qpulse_index,cumulative_error")
    assert len(lines) == len(trace.meta) + 2 + len(trace)


def test_degenerate_amplitude():
    l = 1
    initial = uniform([0, 1], l)
    final = DenseState(np.zeros(8, dtype=complex), 3)
    final.amplitudes[0] = 1.0
    with pytest.raises(DegenerateAmplitudeError):
        phase_error(initial, final, 0, l)


def test_common_phase_distance():
    assert common_phase_distance(3.1, -3.1) == pytest.approx(2 * math.pi - 6.2)
    assert common_phase_distance(0.2, 0.1) == pytest.approx(0.1)


TESTS = [
    ("Hamiltonian structure", test_hamiltonian_structure),
    ("Dense state", test_dense_state),
    ("Resource cap", test_resource_cap),
    ("eigh matches expm", test_eigh_matches_expm),
    ("Propagator cache", test_propagator_cache),
    ("Resonant flip", test_resonant_flip),
    ("Edge1 flip phase sign", test_edge1_flip_phase_sign),
    ("Single pulse", test_apply_pulse_exact),
    ("Frame gauge", test_frame_gauge),
    ("Full adder phase correctedness", test_full_adder_is_phase_corrected),
    ("Single state probability error", test_single_state_probability_error),
    ("Traced run", test_traced_run),
    ("Degenerate amplitude", test_degenerate_amplitude),
    ("Common phase distance", test_common_phase_distance),
]


def main():
    """Run all tests."""
    print("\n" + "=" * 50)
    print("  Exact Simulator - Test Suite")
    print("=" * 50)

    results = {}
    for name, test in TESTS:
        try:
            test()
            results[name] = True
        except Exception as e:
            print(f"❌ {name} failed: {e!r}")
            results[name] = False

    print("\n" + "=" * 50)
    print("TEST SUMMARY")
    print("=" * 50)
    for name, passed in results.items():
        print(f"  {'✓ PASS' if passed else '✗ FAIL'}: {name}")
    total_passed = sum(results.values())
    print(f"\nTotal: {total_passed}/{len(results)} tests passed")
    return total_passed == len(results)


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
