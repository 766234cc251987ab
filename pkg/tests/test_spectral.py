"""Eigensolver checks against dense diagonalization and closed forms."""

import math

import numpy as np
import pytest

from zenoprep.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateGroundStateError,
)
from zenoprep.model import (
    HubbardParams,
    SectorSpec,
    build_hamiltonian,
    build_lattice,
    doped_sector,
)
from zenoprep.spectral import (
    SpectralConfig,
    SpectralHints,
    dense_spectrum,
    extremal_eigenpair,
    fidelity,
    ground_and_first_excited,
    normalize_to_window,
    spectrum_bounds,
)


def hamiltonian(m, k=1, u=4.0, s=1.0, doping=0.0):
    lat = build_lattice(m, k)
    sec = doped_sector(lat, doping)
    return build_hamiltonian(lat, HubbardParams(u=u).at(s), sec)


LANCZOS = SpectralConfig(dense_threshold=1)


class TestTwoSiteClosedForm:
    """Half-filled two-site chain at U=4: the interacting ground energy is
    U/2 - sqrt((U/2)^2 + 4 t^2) with first excited energy 0."""

    E0 = 2.0 - 2.0 * math.sqrt(2.0)

    @pytest.mark.parametrize("config", [SpectralConfig(), LANCZOS],
                             ids=["dense", "lanczos"])
    def test_interacting_point(self, config):
        point = ground_and_first_excited(hamiltonian(2, s=1.0), config)
        assert point.energy0 == pytest.approx(self.E0, abs=1e-9)
        assert point.energy1 == pytest.approx(0.0, abs=1e-9)
        assert point.gap == pytest.approx(2.0 * math.sqrt(2.0) - 2.0, abs=1e-9)

    @pytest.mark.parametrize("config", [SpectralConfig(), LANCZOS],
                             ids=["dense", "lanczos"])
    def test_free_point(self, config):
        point = ground_and_first_excited(hamiltonian(2, s=0.0), config)
        assert point.energy0 == pytest.approx(-2.0, abs=1e-9)
        assert point.energy1 == pytest.approx(0.0, abs=1e-9)
        assert point.energy_max == pytest.approx(2.0, abs=1e-9)


class TestAgainstDense:
    @pytest.mark.parametrize("m,k,u,s", [(3, 1, 2.5, 0.4), (4, 1, 8.0, 1.0),
                                         (5, 1, 4.0, 0.7), (3, 2, 6.0, 0.9)])
    def test_lanczos_matches_eigh(self, m, k, u, s):
        op = hamiltonian(m, k, u, s)
        vals = np.linalg.eigvalsh(op.to_dense())
        point = ground_and_first_excited(op, LANCZOS)
        assert point.energy0 == pytest.approx(vals[0], abs=1e-8)
        assert point.energy1 == pytest.approx(vals[1], abs=1e-7)
        assert point.energy_max == pytest.approx(vals[-1], abs=1e-7)

    def test_eigenvector_residuals(self):
        op = hamiltonian(7, 1, 4.0, 0.8)
        point = ground_and_first_excited(op, LANCZOS)
        h = op.to_dense()
        for energy, vec in ((point.energy0, point.psi0), (point.energy1, point.psi1)):
            residual = np.linalg.norm(h @ vec - energy * vec)
            assert residual < 5e-8

    def test_spectrum_bounds(self):
        op = hamiltonian(7, 1, 4.0, 1.0)
        vals = np.linalg.eigvalsh(op.to_dense())
        lo, hi = spectrum_bounds(op, LANCZOS)
        assert lo == pytest.approx(vals[0], abs=1e-8)
        assert hi == pytest.approx(vals[-1], abs=1e-8)


class TestExtremalEigenpair:
    def test_high_end(self):
        op = hamiltonian(7, 1, 4.0, 1.0)
        vals = np.linalg.eigvalsh(op.to_dense())
        value, vec, info = extremal_eigenpair(op, which="high", config=LANCZOS)
        assert value == pytest.approx(vals[-1], abs=1e-8)
        assert info["matvecs"] > 0 and not info["dense"]
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-10)

    def test_sign_convention_is_deterministic(self):
        op = hamiltonian(4, 1, 4.0, 1.0)
        _, vec_a, _ = extremal_eigenpair(op, config=SpectralConfig(seed=1))
        _, vec_b, _ = extremal_eigenpair(op, config=SpectralConfig(seed=99))
        np.testing.assert_allclose(vec_a, vec_b, atol=1e-9)
        assert vec_a[np.argmax(np.abs(vec_a))] > 0

    def test_which_validation(self):
        with pytest.raises(ConfigError):
            extremal_eigenpair(np.eye(4), which="middle")


class TestWarmStarts:
    def test_hints_cut_matvecs(self):
        op = hamiltonian(7, 1, 4.0, 0.5)
        cold = ground_and_first_excited(op, LANCZOS)
        near = ground_and_first_excited(hamiltonian(7, 1, 4.0, 0.45), LANCZOS)
        hints = SpectralHints(psi0=near.psi0, psi1=near.psi1, psi_max=near.psi_max)
        warm = ground_and_first_excited(op, LANCZOS, hints=hints)
        assert warm.matvecs < cold.matvecs
        assert warm.energy0 == pytest.approx(cold.energy0, abs=1e-9)
        assert warm.energy1 == pytest.approx(cold.energy1, abs=1e-8)


class TestFailureModes:
    def test_non_convergence_reports_best_residual(self):
        op = hamiltonian(7, 1, 4.0, 1.0)
        tight = SpectralConfig(dense_threshold=1, max_matvecs=8, restart_dim=6)
        with pytest.raises(ConvergenceError) as err:
            ground_and_first_excited(op, tight)
        assert err.value.best_residual is not None
        assert err.value.best_residual > 0

    def test_degenerate_ground_state_rejected(self):
        h = np.diag([0.0, 0.0, 1.0, 2.0])
        with pytest.raises(DegenerateGroundStateError):
            ground_and_first_excited(h)

    def test_degeneracy_tolerance_is_configurable(self):
        h = np.diag([0.0, 1e-9, 1.0, 2.0])
        with pytest.raises(DegenerateGroundStateError):
            ground_and_first_excited(h, SpectralConfig(degeneracy_tol=1e-8))
        point = ground_and_first_excited(h, SpectralConfig(degeneracy_tol=1e-12))
        assert point.gap == pytest.approx(1e-9, rel=1e-6)

    def test_tiny_sector_rejected(self):
        with pytest.raises(DegenerateGroundStateError):
            ground_and_first_excited(np.array([[1.0]]))


class TestWindowMap:
    def test_endpoints_land_on_delta(self):
        wmap = normalize_to_window(-3.0, 5.0, delta=0.1)
        assert wmap.energy(-3.0) == pytest.approx(0.1, abs=1e-14)
        assert wmap.energy(5.0) == pytest.approx(2.0 * math.pi - 0.1, abs=1e-14)

    def test_gap_scales_linearly(self):
        wmap = normalize_to_window(-3.0, 5.0, delta=0.1)
        scale = (2.0 * math.pi - 0.2) / 8.0
        assert wmap.gap(0.5) == pytest.approx(0.5 * scale, abs=1e-14)
        assert wmap.gap(1.0) == pytest.approx(2.0 * wmap.gap(0.5), abs=1e-14)

    def test_rejects_empty_window(self):
        with pytest.raises(ConfigError):
            normalize_to_window(2.0, 2.0)


class TestFidelity:
    def test_orthogonal_and_aligned(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        assert fidelity(a, b) == 0.0
        assert fidelity(a, a) == pytest.approx(1.0)
        assert fidelity(a, -a) == pytest.approx(1.0)

    def test_general_overlap(self):
        a = np.array([1.0, 0.0])
        c = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert fidelity(a, c) == pytest.approx(0.5, abs=1e-14)


class TestDenseSpectrum:
    def test_matches_eigvalsh(self):
        op = hamiltonian(3, 1, 4.0, 1.0)
        np.testing.assert_allclose(
            dense_spectrum(op), np.linalg.eigvalsh(op.to_dense()), atol=1e-12
        )

    def test_size_guard(self):
        with pytest.raises(ConfigError):
            dense_spectrum(np.zeros((4097, 4097)))
