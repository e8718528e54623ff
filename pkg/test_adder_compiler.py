"""
Tests for the adder compiler: gate decomposition, symbolic phase
correctedness, the classical oracle and the schedule text format.
"""
import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from adder_compiler import (
    FGate,
    GLOBAL_PHASE,
    Position,
    compile_fgate,
    compile_full_adder,
    expected_global_phase,
    format_schedule,
    gate_phase_sums,
    gate_probability_correct,
    gate_rows,
    gates_for,
    ideal_action,
    ideal_trajectory,
    is_phase_corrected,
    parse_schedule,
    protocol_from_schedule,
)
from chain_model import ChainParams, decode_sum, encode_addend_register
from errors import ContractViolation, DomainError
from pulse_library import P, QPulseKind, compute_aux, wrap_phase


def every_gate(max_l=3):
    for l in range(1, max_l + 1):
        L = 2 * l + 1
        for bit in (0, 1):
            yield FGate(bit, Position.RIGHT, 1), L
            if l >= 2:
                yield FGate(bit, Position.LEFT, L - 2), L
            if l >= 3:
                yield FGate(bit, Position.MIDDLE, 3), L


def test_gates_for():
    gates = gates_for(0b101, 3)
    assert [g.position for g in gates] == [Position.RIGHT, Position.MIDDLE, Position.LEFT]
    assert [g.k for g in gates] == [1, 3, 5]
    assert [g.addend_bit for g in gates] == [1, 0, 1]
    assert [g.position for g in gates_for(1, 1)] == [Position.RIGHT]

    with pytest.raises(DomainError):
        gates_for(8, 3)
    with pytest.raises(DomainError):
        gates_for(0, 0)
    with pytest.raises(DomainError):
        FGate(0, Position.MIDDLE, 4).validate(9)


def test_pulse_counts():
    aux = compute_aux(8)
    # Right gate: 3 Q-pulses for a 0 bit, 2 for a 1 bit; Middle/Left: 13 and 15
    p = ChainParams(l=1, delta_omega=100.0)
    assert compile_full_adder(0, 1, aux, p).qpulse_count == 3
    assert compile_full_adder(1, 1, aux, p).qpulse_count == 2
    p = ChainParams(l=3, delta_omega=100.0)
    protocol = compile_full_adder(0b110, 3, aux, p)
    assert protocol.qpulse_count == 3 + 15 + 15
    doubles = sum(1 for q in protocol.qpulses if q.kind in (QPulseKind.Q00, QPulseKind.Q11))
    assert protocol.physical_pulse_count == protocol.qpulse_count + doubles
    assert protocol.qpulse_starts[0] == 0 and len(protocol.qpulse_starts) == protocol.qpulse_count


def test_schedule_is_back_to_back():
    aux = compute_aux(8)
    p = ChainParams(l=2, delta_omega=100.0)
    protocol = compile_full_adder(3, 2, aux, p)
    assert protocol.schedule[0].t0 == 0.0
    for before, after in zip(protocol.schedule, protocol.schedule[1:]):
        assert after.t0 == pytest.approx(before.t_end)
    assert protocol.total_time == pytest.approx(protocol.schedule[-1].t_end)

    with pytest.raises(ContractViolation):
        compile_full_adder(0, 3, aux, p)


def test_single_gate_register_uses_edge_pulse():
    rows = gate_rows(FGate(0, Position.RIGHT, 1), 3)
    assert [kind for kind, _, _ in rows] == [QPulseKind.Q01, QPulseKind.Q1EDGE, QPulseKind.Q1EDGE]
    assert [target for _, target, _ in rows] == [1, 2, 0]
    rows = gate_rows(FGate(0, Position.RIGHT, 1), 5)
    assert rows[1][0] is QPulseKind.Q01


def test_every_gate_is_phase_corrected():
    for g, L in every_gate():
        assert is_phase_corrected(g, L), g.label
        assert gate_probability_correct(g, L), g.label


def test_common_phase():
    for g, L in every_gate():
        sums = list(gate_phase_sums(g, L).values())
        expected = GLOBAL_PHASE if g.position is Position.RIGHT else P()
        assert sums[0].equal_mod_2pi(expected), f"{g.label}: {sums[0]}"

    aux = compute_aux(8)
    protocol = compile_full_adder(1, 2, aux, ChainParams(l=2, delta_omega=100.0))
    assert expected_global_phase(protocol) == pytest.approx(wrap_phase(-3 * aux.alpha))


def test_corrupted_phase_is_detected():
    g = FGate(1, Position.MIDDLE, 3)
    rows = gate_rows(g, 7)
    kind, target, phi = rows[1]
    rows[1] = (kind, target, phi + P(gamma=1))
    assert not is_phase_corrected(g, 7, rows)


def test_addition_oracle():
    aux = compute_aux(8)
    for l in (1, 2, 3):
        p = ChainParams(l=l, delta_omega=100.0)
        for A in range(1 << l):
            protocol = compile_full_adder(A, l, aux, p)
            for B in range(1 << l):
                s = encode_addend_register(B, l)
                final = ideal_trajectory(s, protocol.qpulses)[-1]
                assert final == ideal_action(s, A, l)
                assert decode_sum(final, l) == A + B


def test_ideal_action_checks_layout():
    s = encode_addend_register(1, 2).flip(1)
    with pytest.raises(DomainError):
        ideal_action(s, 0, 2)


def test_compile_fgate():
    aux = compute_aux(8)
    qpulses = compile_fgate(FGate(1, Position.RIGHT, 1), aux, L=5)
    assert [q.kind for q in qpulses] == [QPulseKind.Q01, QPulseKind.Q0EDGE]
    assert qpulses[0].phi == pytest.approx(wrap_phase(0.5 * math.pi + 4 * aux.alpha))


def test_schedule_text_format():
    aux = compute_aux(8)
    p = ChainParams(l=2, delta_omega=100.0)
    protocol = compile_full_adder(2, 2, aux, p)
    text = format_schedule(protocol, header={"A": 2, "l": 2})
    assert text.startswith("# A=2\n# l=2\n")

    parsed = parse_schedule(text)
    assert len(parsed) == protocol.physical_pulse_count
    assert [x.sub for x in parsed] == [x.sub for x in protocol.schedule]
    assert parsed[-1].t_end == pytest.approx(protocol.total_time, rel=1e-12)

    rebuilt = protocol_from_schedule(parsed, 2)
    assert rebuilt.qpulse_count == protocol.qpulse_count
    assert rebuilt.qpulse_starts == protocol.qpulse_starts
    assert [q.kind for q in rebuilt.qpulses] == [q.kind for q in protocol.qpulses]
    with pytest.raises(DomainError):
        expected_global_phase(rebuilt)
    with_aux = protocol_from_schedule(parsed, 2, aux)
    assert expected_global_phase(with_aux) == pytest.approx(expected_global_phase(protocol))

    with pytest.raises(DomainError):
        parse_schedule("0 Q01 1 0.1 100\n")
    with pytest.raises(DomainError):
        parse_schedule("0 Q02 1 0.1 100 1 0 0\n")


TESTS = [
    ("Gate decomposition", test_gates_for),
    ("Pulse counts", test_pulse_counts),
    ("Back-to-back schedule", test_schedule_is_back_to_back),
    ("Single-gate register", test_single_gate_register_uses_edge_pulse),
    ("Phase correctedness", test_every_gate_is_phase_corrected),
    ("Common phase", test_common_phase),
    ("Corrupted phase detected", test_corrupted_phase_is_detected),
    ("Addition oracle", test_addition_oracle),
    ("Layout check", test_ideal_action_checks_layout),
    ("Single gate compilation", test_compile_fgate),
    ("Schedule text format", test_schedule_text_format),
]


def main():
    """Run all tests."""
    print("\n" + "=" * 50)
    print("  Adder Compiler - Test Suite")
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
