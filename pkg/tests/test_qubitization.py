"""Tests for the walk-operator gap model and its explicit block encoding.

The arccos reference values are frozen from an independent
high-precision evaluation.
"""

import numpy as np
import pytest

from zenoprep.errors import CapacityError, ConfigError
from zenoprep.model import (
    HubbardParams,
    build_hamiltonian,
    build_lattice,
    doped_sector,
)
from zenoprep.pauli import PauliSum, pauli_decompose
from zenoprep.qubitization import (
    DEFAULT_NORM,
    QubitizationSettings,
    build_walk_operator,
    normalized_profile,
    qubitize_schedule,
    qubitized_gap,
    reversed_hamiltonian,
    walk_eigenphase,
    walk_eigenspace_pair,
    walk_eigenstate,
    walk_gap_crossover,
    window_maps,
)
from zenoprep.schedule import ScheduleData, ScheduleEvaluator, SchedulePoint
from zenoprep.spectral import SpectralConfig, normalize_to_window


def make_data(svals, e0s, e1s, emaxs, fids):
    points = tuple(
        SchedulePoint(s=s, energy0=a, energy1=b, energy_max=c)
        for s, a, b, c in zip(svals, e0s, e1s, emaxs)
    )
    return ScheduleData(points=points, fidelities=tuple(fids))


def two_site_setting(s=1.0):
    lat = build_lattice(2, 1)
    params = HubbardParams(u=4.0)
    sec = doped_sector(lat, 0.0)
    h = build_hamiltonian(lat, params.at(s), sec).to_dense()
    evals, evecs = np.linalg.eigh(h)
    wmap = normalize_to_window(evals[0], evals[-1], 0.1)
    h_win = wmap.scale * h + wmap.shift * np.eye(len(h))
    h_bar = reversed_hamiltonian(pauli_decompose(h_win), DEFAULT_NORM)
    walk = build_walk_operator(h_bar)
    e_bars = 1.0 - wmap.energy(evals) / DEFAULT_NORM
    return walk, evals, evecs, e_bars


class TestQubitizedGap:
    def test_frozen_values(self):
        assert qubitized_gap(0.1) == pytest.approx(0.17864988981835816, rel=1e-12)
        assert qubitized_gap(2.0) == pytest.approx(0.8207261392137001, rel=1e-12)

    def test_full_range(self):
        assert qubitized_gap(2.0 * DEFAULT_NORM) == pytest.approx(np.pi, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ConfigError):
            qubitized_gap(0.0)
        with pytest.raises(ConfigError):
            qubitized_gap(2.0 * DEFAULT_NORM + 0.1)

    def test_small_gap_expansion(self):
        # acos(1 - x) ~ sqrt(2 x) for small x, so tiny gaps blow up to
        # sqrt(2 gap / norm).
        gap = 1e-8
        assert qubitized_gap(gap) == pytest.approx(
            np.sqrt(2.0 * gap / DEFAULT_NORM), rel=1e-6
        )


class TestCrossover:
    def test_frozen_value(self):
        c = walk_gap_crossover()
        assert c == pytest.approx(0.3210582760120850, rel=1e-10)
        assert 0.31 < c < 0.33

    def test_fixed_point(self):
        c = walk_gap_crossover()
        assert qubitized_gap(c) == pytest.approx(c, abs=1e-9)

    def test_separates_regimes(self):
        c = walk_gap_crossover()
        assert qubitized_gap(0.5 * c) > 0.5 * c
        assert qubitized_gap(2.0 * c) < 2.0 * c


class TestSettings:
    def test_validation(self):
        with pytest.raises(ConfigError):
            QubitizationSettings(norm=0.0)
        with pytest.raises(ConfigError):
            QubitizationSettings(mode="sparse")


class TestWalkOperator:
    def test_unitary(self):
        walk, *_ = two_site_setting()
        w = walk.to_dense()
        assert np.abs(w.conj().T @ w - np.eye(walk.dim)).max() < 1e-12

    def test_prepare_encodes_betas(self):
        walk, *_ = two_site_setting()
        b = walk.prepare_matrix()
        assert np.abs(b.T @ b - np.eye(walk.n_terms)).max() < 1e-12
        np.testing.assert_allclose(b[:, 0], walk.betas, atol=1e-12)

    def test_one_norm_of_coefficients(self):
        walk, *_ = two_site_setting()
        assert np.sum(walk.betas**2) == pytest.approx(1.0, abs=1e-12)

    def test_eigenstates(self):
        walk, evals, evecs, e_bars = two_site_setting()
        w = walk.to_dense()
        for i in range(len(evals)):
            theta = walk_eigenphase(walk, e_bars[i])
            for branch in (+1, -1):
                phi = walk_eigenstate(walk, evecs[:, i], e_bars[i], branch)
                assert np.linalg.norm(phi) == pytest.approx(1.0, abs=1e-12)
                residual = np.linalg.norm(
                    w @ phi - np.exp(1j * branch * theta) * phi
                )
                assert residual < 1e-8

    def test_eigenspace_pair(self):
        walk, evals, evecs, e_bars = two_site_setting()
        w = walk.to_dense()
        for i in range(len(evals)):
            u, u_perp = walk_eigenspace_pair(walk, evecs[:, i], e_bars[i])
            assert u @ u == pytest.approx(1.0, abs=1e-12)
            assert u_perp @ u_perp == pytest.approx(1.0, abs=1e-12)
            assert abs(u @ u_perp) < 1e-12
            projector = np.outer(u, u) + np.outer(u_perp, u_perp)
            leak = np.eye(walk.dim) - projector
            assert np.linalg.norm(leak @ (w @ u)) < 1e-12
            assert np.linalg.norm(leak @ (w @ u_perp)) < 1e-12

    def test_encode(self):
        walk, _, evecs, _ = two_site_setting()
        psi = evecs[:, 0]
        np.testing.assert_allclose(
            walk.encode(psi), np.kron(walk.betas, psi), atol=1e-14
        )

    def test_select_real_for_real_input(self):
        walk, _, evecs, _ = two_site_setting()
        out = walk.select_encoded(evecs[:, 0])
        assert out.dtype == np.float64

    def test_explicit_string_register(self):
        walk, *_ = two_site_setting()
        h_bar = reversed_hamiltonian(
            pauli_decompose(np.diag([0.0, 1.0, 2.0, 3.0])), DEFAULT_NORM
        )
        extended = tuple(sorted(set(walk.strings) | {s for s, _ in h_bar.terms}))
        wide = build_walk_operator(h_bar, extended)
        assert wide.strings == extended
        with pytest.raises(ConfigError):
            build_walk_operator(h_bar, ("II",))

    def test_empty_sum_rejected(self):
        with pytest.raises(ConfigError):
            build_walk_operator(PauliSum(n_qubits=2, terms=()))

    def test_dense_capacity(self):
        big = PauliSum(
            n_qubits=13, terms=(("I" * 13, 1.0), ("Z" + "I" * 12, 0.5))
        )
        walk = build_walk_operator(big)
        with pytest.raises(CapacityError):
            walk.select_matrix()

    def test_eigenphase_validation(self):
        walk, *_ = two_site_setting()
        with pytest.raises(ConfigError):
            walk_eigenphase(walk, 2.0 * walk.norm_used)
        with pytest.raises(ConfigError):
            walk_eigenstate(walk, np.ones(4) / 2.0, 0.1, branch=0)


class TestProfiles:
    def test_window_maps_pin_edges(self):
        data = make_data(
            [0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [4.0, 3.0], [0.9]
        )
        maps = window_maps(data, delta=0.1)
        assert maps[0].energy(0.0) == pytest.approx(0.1, abs=1e-12)
        assert maps[0].energy(4.0) == pytest.approx(2.0 * np.pi - 0.1, abs=1e-12)
        assert maps[1].energy(-1.0) == pytest.approx(0.1, abs=1e-12)

    def test_normalized_profile(self):
        data = make_data(
            [0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [4.0, 3.0], [0.9]
        )
        prof = normalized_profile(data, delta=0.1)
        assert prof.units == "window"
        assert prof.mode == "normalized"
        assert prof.fidelities == data.fidelities
        scale0 = (2.0 * np.pi - 0.2) / 4.0
        assert prof.gaps[0] == pytest.approx(scale0 * 1.0, rel=1e-12)
        scale1 = (2.0 * np.pi - 0.2) / 4.0
        assert prof.gaps[1] == pytest.approx(scale1 * 1.0, rel=1e-12)
        assert prof.min_gap == min(prof.gaps)
        np.testing.assert_allclose(prof.step_gaps, prof.gaps[1:])

    def test_gapmap_composes_window_and_arccos(self):
        data = make_data(
            [0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [4.0, 3.0], [0.9]
        )
        prof = qubitize_schedule(data)
        norm_prof = normalized_profile(data, delta=0.1)
        assert prof.units == "walk"
        assert prof.mode == "gapmap"
        assert prof.fidelities == data.fidelities
        for walk_gap, window_gap in zip(prof.gaps, norm_prof.gaps):
            assert walk_gap == pytest.approx(
                qubitized_gap(window_gap), rel=1e-12
            )


class TestExactMode:
    def make_evaluator(self, m=2):
        lat = build_lattice(m, 1)
        params = HubbardParams(u=4.0)
        sec = doped_sector(lat, 0.0)
        return ScheduleEvaluator(lat, params, sec, SpectralConfig())

    def test_requires_evaluator(self):
        ev = self.make_evaluator()
        data = ev.evaluate_schedule([0.0, 0.5, 1.0])
        with pytest.raises(ConfigError):
            qubitize_schedule(data, QubitizationSettings(mode="exact"))

    def test_tracks_bare_fidelities(self):
        ev = self.make_evaluator()
        data = ev.evaluate_schedule([0.0, 0.25, 0.5, 0.75, 1.0])
        prof = qubitize_schedule(
            data, QubitizationSettings(mode="exact"), evaluator=ev
        )
        assert prof.mode == "exact"
        assert len(prof.fidelities) == len(data.fidelities)
        for exact, bare in zip(prof.fidelities, data.fidelities):
            assert 0.0 <= exact <= 1.0
            # The rank-2 eigenspace projections shed some ancilla weight,
            # so exact success probabilities sit slightly below the bare
            # ground-state overlaps.
            assert exact == pytest.approx(bare, abs=0.1)
            assert exact <= bare + 1e-9

    def test_dimension_capacity(self):
        lat = build_lattice(4, 2)
        params = HubbardParams(u=6.0)
        sec = doped_sector(lat, 0.0)
        ev = ScheduleEvaluator(lat, params, sec, SpectralConfig())
        data = make_data(
            [0.0, 1.0], [0.0, 0.0], [1.0, 1.0], [4.0, 4.0], [0.9]
        )
        with pytest.raises(CapacityError):
            qubitize_schedule(
                data, QubitizationSettings(mode="exact"), evaluator=ev
            )

    def test_power_of_two_requirement(self):
        ev = self.make_evaluator(m=4)
        data = make_data(
            [0.0, 1.0], [0.0, 0.0], [1.0, 1.0], [4.0, 4.0], [0.9]
        )
        with pytest.raises(CapacityError):
            qubitize_schedule(
                data, QubitizationSettings(mode="exact"), evaluator=ev
            )
