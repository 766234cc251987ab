"""Pauli-string algebra checked against explicit matrix constructions."""

import itertools

import numpy as np
import pytest

from zenoprep.errors import CapacityError, ConfigError
from zenoprep.model import (
    HubbardParams,
    build_hamiltonian,
    build_lattice,
    doped_sector,
    sector_embedding,
)
from zenoprep.pauli import (
    PauliSum,
    apply_string,
    hopping_strings,
    jordan_wigner,
    onsite_strings,
    pauli_decompose,
    string_matrix,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def annihilator(n_modes: int, p: int) -> np.ndarray:
    """Dense fermionic annihilation operator on mode p, built directly
    from the string convention: Z on every mode below p, lowering on p."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n_modes)):
        if q > p:
            factor = I2
        elif q == p:
            factor = lower
        else:
            factor = Z
        out = np.kron(out, factor)
    return out


class TestStringMatrix:
    def test_single_qubit_literals(self):
        assert np.array_equal(string_matrix("I"), I2)
        assert np.array_equal(string_matrix("X"), X)
        assert np.array_equal(string_matrix("Y"), Y)
        assert np.array_equal(string_matrix("Z"), Z)

    def test_character_zero_is_low_bit(self):
        assert np.array_equal(string_matrix("XI"), np.kron(I2, X))
        assert np.array_equal(string_matrix("IX"), np.kron(X, I2))
        assert np.array_equal(string_matrix("ZY"), np.kron(Y, Z))

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            string_matrix("I" * 15)


class TestApplyString:
    def test_matches_dense_on_every_three_qubit_string(self):
        rng = np.random.default_rng(11)
        vec = rng.normal(size=8) + 1j * rng.normal(size=8)
        for chars in itertools.product("IXYZ", repeat=3):
            s = "".join(chars)
            expected = string_matrix(s) @ vec
            np.testing.assert_allclose(apply_string(s, vec), expected, atol=1e-14)

    def test_y_phases(self):
        up = np.array([1.0, 0.0])
        down = np.array([0.0, 1.0])
        np.testing.assert_allclose(apply_string("Y", up), 1j * down)
        np.testing.assert_allclose(apply_string("Y", down), -1j * up)

    def test_batched_rows(self):
        rng = np.random.default_rng(3)
        block = rng.normal(size=(4, 16))
        single = np.stack([apply_string("XZYI", row) for row in block])
        np.testing.assert_allclose(apply_string("XZYI", block), single, atol=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            apply_string("XX", np.ones(8))


class TestPauliSum:
    def test_simplified_merges_and_drops(self):
        ps = PauliSum(2, (("XX", 0.5), ("XX", 0.25), ("ZI", 0.3), ("ZI", -0.3)))
        simple = ps.simplified()
        assert simple.terms == (("XX", 0.75),)

    def test_one_norm(self):
        ps = PauliSum(2, (("XX", 0.5), ("YY", -0.25)))
        assert ps.one_norm() == 0.75

    def test_scaled_and_shifted(self):
        ps = PauliSum(1, (("Z", 1.0),))
        np.testing.assert_allclose(ps.scaled(-2.0).to_dense(), -2.0 * Z)
        np.testing.assert_allclose(ps.shifted(3.0).to_dense(), Z + 3.0 * I2)

    def test_rejects_bad_terms(self):
        with pytest.raises(ConfigError):
            PauliSum(2, (("X", 1.0),))
        with pytest.raises(ConfigError):
            PauliSum(2, (("XQ", 1.0),))


class TestFermionTerms:
    @pytest.mark.parametrize("a,b", [(0, 1), (0, 2), (1, 3), (0, 3)])
    def test_hopping_matches_ladder_operators(self, a, b):
        n = 4
        amp = 0.7
        ca, cb = annihilator(n, a), annihilator(n, b)
        expected = amp * (ca.conj().T @ cb + cb.conj().T @ ca)
        total = sum(c * string_matrix(s) for s, c in hopping_strings(n, a, b, amp))
        np.testing.assert_allclose(total, expected, atol=1e-13)

    def test_onsite_is_double_occupancy(self):
        terms = onsite_strings(2, 0, 5.0)
        total = sum(c * string_matrix(s) for s, c in terms)
        np.testing.assert_allclose(total, np.diag([0.0, 0.0, 0.0, 5.0]), atol=1e-14)

    def test_hopping_validates_modes(self):
        with pytest.raises(ConfigError):
            hopping_strings(4, 2, 2, 1.0)


class TestJordanWigner:
    @pytest.mark.parametrize("m,s", [(2, 0.0), (2, 1.0), (3, 0.6)])
    def test_matches_ladder_operator_hamiltonian(self, m, s):
        lat = build_lattice(m, 1)
        params = HubbardParams(u=4.0).at(s)
        n_modes = 2 * lat.n_sites
        ops = [annihilator(n_modes, p) for p in range(n_modes)]
        dim = 1 << n_modes
        expected = np.zeros((dim, dim), dtype=complex)
        for i, j in lat.edges:
            for spin in (0, 1):
                ca, cb = ops[2 * i + spin], ops[2 * j + spin]
                expected += params.t_hop * (ca.conj().T @ cb + cb.conj().T @ ca)
        for site in range(lat.n_sites):
            n_up = ops[2 * site].conj().T @ ops[2 * site]
            n_dn = ops[2 * site + 1].conj().T @ ops[2 * site + 1]
            expected += params.u * params.s * (n_up @ n_dn)
        dense = jordan_wigner(lat, params).to_dense()
        np.testing.assert_allclose(dense, expected, atol=1e-12)

    def test_sector_restriction_matches_sector_hamiltonian(self):
        lat = build_lattice(3, 1)
        params = HubbardParams(u=6.0).at(0.8)
        sec = doped_sector(lat)
        full = jordan_wigner(lat, params).to_dense()
        idx = sector_embedding(sec)
        restricted = full[np.ix_(idx, idx)]
        sector = build_hamiltonian(lat, params, sec).to_dense()
        np.testing.assert_allclose(restricted, sector, atol=1e-12)
        # sector indices are exhaustive for the block: off-block coupling
        # between occupation sectors vanishes
        mask = np.ones(full.shape[0], dtype=bool)
        mask[idx] = False
        np.testing.assert_allclose(full[np.ix_(idx, mask)], 0.0, atol=1e-12)

    def test_coefficients_are_real(self):
        lat = build_lattice(3, 1)
        ps = jordan_wigner(lat, HubbardParams(u=4.0).at(1.0))
        assert all(isinstance(c, float) for _, c in ps.terms)


class TestPauliDecompose:
    def test_round_trip_random_hermitian_sum(self):
        rng = np.random.default_rng(5)
        strings = ["XIZ", "YYI", "ZZZ", "IXI", "III"]
        coeffs = rng.normal(size=len(strings))
        h = sum(c * string_matrix(s) for s, c in zip(strings, coeffs))
        recovered = dict(pauli_decompose(h).terms)
        assert set(recovered) == set(strings)
        for s, c in zip(strings, coeffs):
            assert recovered[s] == pytest.approx(c, abs=1e-12)

    def test_round_trip_on_hubbard(self):
        lat = build_lattice(2, 1)
        ps = jordan_wigner(lat, HubbardParams(u=4.0).at(1.0))
        again = pauli_decompose(ps.to_dense())
        assert dict(again.terms) == pytest.approx(dict(ps.terms), abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ConfigError):
            pauli_decompose(np.ones((3, 3)))
        skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(ConfigError):
            pauli_decompose(skew)
