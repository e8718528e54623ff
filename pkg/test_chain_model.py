"""
Tests for the static chain model: energies, neighbour classification,
register layout and the classical full-adder table.
Run with pytest, or directly for a summary.
"""
import itertools
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from chain_model import (
    BasisState,
    ChainParams,
    NeighborConfig,
    classical_full_adder,
    decode_sum,
    encode_addend_register,
    energy_vector,
    flip_energy,
    magnetization_vector,
    neighbor_config,
    state_energy,
    transition_frequency,
)
from errors import ContractViolation, DomainError


def all_states(L):
    return [BasisState(bits, L) for bits in range(1 << L)]


def test_chain_params():
    p = ChainParams(l=3, delta_omega=100.0, omega0=5.0)
    assert p.L == 7
    assert p.larmor(0) == 5.0
    assert p.larmor(4) == 405.0
    assert np.allclose(p.larmor_array(), 5.0 + 100.0 * np.arange(7))

    with pytest.raises(DomainError):
        ChainParams(l=0, delta_omega=100.0)
    with pytest.raises(DomainError):
        ChainParams(l=2, delta_omega=5.0)
    with pytest.raises(DomainError):
        ChainParams(l=2, delta_omega=100.0, J=2.0)


def test_basis_state():
    s = BasisState.from_string("0110")
    assert s.to_list() == [0, 1, 1, 0]
    assert s.bit(1) == 1 and s.bit(3) == 0
    assert str(s) == "0110"
    assert s.flip(0) == BasisState.from_string("0111")
    assert s.flip(2).flip(2) == s
    assert hash(s) == hash(BasisState.from_bits([0, 1, 1, 0]))
    assert BasisState.zeros(5).bits == 0

    with pytest.raises(ContractViolation):
        s.bit(4)
    with pytest.raises(ContractViolation):
        BasisState(8, 3)
    with pytest.raises(ContractViolation):
        BasisState.from_bits([0, 2])


def test_energy_vector_matches_state_energy():
    p = ChainParams(l=2, delta_omega=100.0, omega0=3.0)
    energies = energy_vector(p)
    for s in all_states(p.L):
        assert energies[s.bits] == pytest.approx(state_energy(s, p), abs=1e-9)


def test_transition_frequency_is_energy_gap():
    p = ChainParams(l=2, delta_omega=100.0)
    for s in all_states(p.L):
        for k in range(p.L):
            gap = state_energy(s.flip(k), p) - state_energy(s, p)
            assert flip_energy(s, k, p) == pytest.approx(gap, abs=1e-9)
            assert transition_frequency(s, k, p) == pytest.approx(abs(gap), abs=1e-9)


def test_worked_energies():
    p = ChainParams(l=1, delta_omega=100.0, omega0=0.0)
    assert state_energy(BasisState.zeros(3), p) == pytest.approx(-151.0)
    assert state_energy(BasisState.from_string("111"), p) == pytest.approx(149.0)
    # one spin flipped inside a block of zeros costs omega_k + 2J
    q = ChainParams(l=2, delta_omega=100.0)
    assert flip_energy(BasisState.zeros(5), 2, q) == pytest.approx(q.larmor(2) + 2.0)
    assert flip_energy(BasisState.zeros(5).flip(2), 2, q) == pytest.approx(-(q.larmor(2) + 2.0))


def test_worked_transition_frequencies():
    p = ChainParams(l=2, delta_omega=100.0, omega0=0.0)
    assert transition_frequency(BasisState.zeros(5), 2, p) == pytest.approx(202.0)
    assert transition_frequency(BasisState.from_string("01000"), 2, p) == pytest.approx(200.0)
    assert transition_frequency(BasisState.from_string("01010"), 2, p) == pytest.approx(198.0)
    assert transition_frequency(BasisState.zeros(5), 0, p) == pytest.approx(1.0)
    # Edge1 at spin 0 with omega0 = 0: the closed form omega_0 - J is -1, the gap is 1
    assert transition_frequency(BasisState.from_string("00010"), 0, p) == pytest.approx(1.0)
    assert flip_energy(BasisState.from_string("00010"), 0, p) == pytest.approx(-1.0)
    assert transition_frequency(BasisState.from_string("01000"), 4, p) == pytest.approx(399.0)

    assert neighbor_config(BasisState.from_string("101"), 1) is NeighborConfig.BOTH1
    assert neighbor_config(BasisState.from_string("001"), 1) is NeighborConfig.MIXED
    assert neighbor_config(BasisState.from_string("010"), 0) is NeighborConfig.EDGE1


def test_worked_register_examples():
    assert encode_addend_register(0, 5) == BasisState.zeros(11)
    assert str(encode_addend_register(1, 2)) == "00100"
    assert [k for k in range(11) if encode_addend_register(7, 5).bit(k)] == [2, 4, 6]
    assert decode_sum(BasisState.zeros(11), 5) == 0


def test_addition_table_rows():
    rows = [
        ((0, 0, 0), (0, 0)), ((0, 0, 1), (1, 0)), ((0, 1, 0), (1, 0)), ((0, 1, 1), (0, 1)),
        ((1, 0, 0), (1, 0)), ((1, 0, 1), (0, 1)), ((1, 1, 0), (0, 1)), ((1, 1, 1), (1, 1)),
    ]
    for inputs, expected in rows:
        assert classical_full_adder(*inputs) == expected


def ripple_sum_state(A, register, l):
    """Sum bits on spins 0, 2, ..., 2l-2 and the final carry on spin 2l."""
    bits = [0] * (2 * l + 1)
    carry = 0
    for j in range(l):
        bits[2 * j], carry = classical_full_adder((A >> j) & 1, register.bit(2 * j + 2), carry)
    bits[2 * l] = carry
    return BasisState.from_bits(bits)


def test_encode_decode_round_trip():
    for l in range(1, 9):
        for B in range(1 << l):
            register = encode_addend_register(B, l)
            for A in range(1 << l):
                assert decode_sum(ripple_sum_state(A, register, l), l) == A + B


def test_neighbor_config():
    s = BasisState.from_string("01010")
    assert neighbor_config(s, 0) is NeighborConfig.EDGE1
    assert neighbor_config(s, 4) is NeighborConfig.EDGE1
    assert neighbor_config(s, 2) is NeighborConfig.BOTH1
    assert neighbor_config(s, 1) is NeighborConfig.BOTH0
    assert neighbor_config(BasisState.from_string("00110"), 2) is NeighborConfig.MIXED
    assert neighbor_config(BasisState.zeros(5), 0) is NeighborConfig.EDGE0

    # the state of spin k itself does not matter
    p = ChainParams(l=2, delta_omega=100.0)
    assert transition_frequency(s, 2, p) == transition_frequency(s.flip(2), 2, p)
    assert transition_frequency(BasisState.zeros(5), 2, p) == pytest.approx(p.larmor(2) + 2.0)


def test_magnetization_vector():
    z = magnetization_vector(3)
    assert z[0] == 1.5
    assert z[0b111] == -1.5
    assert z[0b010] == 0.5


def test_register_layout():
    s = encode_addend_register(0b101, 3)
    assert len(s) == 7
    assert [k for k in range(7) if s.bit(k)] == [2, 6]
    # addend b sits on the even spins above 0, the sum is read from 0, 2, ..., 2l
    assert decode_sum(encode_addend_register(0b11, 2), 2) == 0b110

    with pytest.raises(DomainError):
        encode_addend_register(4, 2)
    with pytest.raises(DomainError):
        encode_addend_register(1, 0)


def test_classical_full_adder():
    for a, b, c in itertools.product((0, 1), repeat=3):
        total, carry = classical_full_adder(a, b, c)
        assert total + 2 * carry == a + b + c
    with pytest.raises(DomainError):
        classical_full_adder(2, 0, 0)


TESTS = [
    ("Chain parameters", test_chain_params),
    ("Basis state", test_basis_state),
    ("Energy vector", test_energy_vector_matches_state_energy),
    ("Transition frequency", test_transition_frequency_is_energy_gap),
    ("Worked energies", test_worked_energies),
    ("Worked transition frequencies", test_worked_transition_frequencies),
    ("Worked register examples", test_worked_register_examples),
    ("Addition table rows", test_addition_table_rows),
    ("Encode/decode round trip", test_encode_decode_round_trip),
    ("Neighbour configuration", test_neighbor_config),
    ("Magnetization", test_magnetization_vector),
    ("Register layout", test_register_layout),
    ("Classical full adder", test_classical_full_adder),
]


def main():
    """Run all tests."""
    print("\n" + "=" * 50)
    print("  Chain Model - Test Suite")
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
