"""Extremal eigenpairs of sector Hamiltonians.

Small problems go through dense diagonalization; everything else uses
Lanczos with full reorthogonalization and thick restarts, which keeps the
basis bounded so the working set stays within desk-machine memory.  The
first excited state comes from a second run with the ground state
penalized upward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ConvergenceError, DegenerateGroundStateError
from .model import SparseOperator


@dataclass(frozen=True)
class SpectralConfig:
    tol: float = 1e-9               # residual threshold relative to the norm estimate
    max_matvecs: int = 40_000
    restart_dim: int = 200          # Lanczos basis size before a thick restart
    keep_low: int = 8               # Ritz vectors kept at the low end on restart
    keep_high: int = 3
    dense_threshold: int = 600
    degeneracy_tol: float = 1e-8
    check_every: int = 5
    seed: int = 1905
    penalty_retries: int = 3


@dataclass
class SpectralPoint:
    """Ground and first-excited data of one Hamiltonian, with the spectrum
    edges needed for window normalization."""

    s: float | None
    energy0: float
    energy1: float
    energy_max: float
    psi0: np.ndarray
    psi1: np.ndarray | None = None
    psi_max: np.ndarray | None = None
    matvecs: int = 0
    residual: float = 0.0

    @property
    def gap(self) -> float:
        return self.energy1 - self.energy0

    @property
    def spread(self) -> float:
        return self.energy_max - self.energy0


@dataclass
class SpectralHints:
    """Optional warm-start vectors, typically from a neighboring s."""

    psi0: np.ndarray | None = None
    psi1: np.ndarray | None = None
    psi_max: np.ndarray | None = None


@dataclass(frozen=True)
class WindowMap:
    """Affine map e -> scale * e + shift placing the spectrum in
    [delta, 2*pi - delta]."""

    scale: float
    shift: float
    delta: float
    e_min: float
    e_max: float

    def energy(self, e: float) -> float:
        return self.scale * e + self.shift

    def gap(self, raw_gap: float) -> float:
        return self.scale * raw_gap


def normalize_to_window(e_min: float, e_max: float, delta: float = 0.1) -> WindowMap:
    if not 0.0 < delta < np.pi:
        raise ConfigError(f"window margin must lie in (0, pi), got {delta}")
    spread = e_max - e_min
    if spread <= 0.0:
        raise ConfigError(
            f"cannot normalize a spectrum with no spread (e_min={e_min}, e_max={e_max})"
        )
    scale = (2.0 * np.pi - 2.0 * delta) / spread
    return WindowMap(
        scale=scale, shift=delta - scale * e_min, delta=delta, e_min=e_min, e_max=e_max
    )


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Squared overlap of two normalized states."""
    return float(abs(np.vdot(a, b)) ** 2)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v


def _as_apply(op) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    if isinstance(op, SparseOperator):
        return op.apply, op.dim
    if sp.issparse(op):
        m = sp.csr_matrix(op)
        return (lambda v: m @ v), m.shape[0]
    arr = np.asarray(op)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"operator must be square, got shape {arr.shape}")
    return (lambda v: arr @ v), arr.shape[0]


def _to_dense(op, dim: int) -> np.ndarray:
    if isinstance(op, SparseOperator):
        return op.to_dense()
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op, dtype=float)


@dataclass
class _RitzEnd:
    value: float
    vector: np.ndarray
    residual_estimate: float


class _LanczosResult:
    def __init__(self, low: _RitzEnd, high: _RitzEnd | None, matvecs: int):
        self.low = low
        self.high = high
        self.matvecs = matvecs


def _thick_restart_lanczos(
    apply_fn: Callable[[np.ndarray], np.ndarray],
    dim: int,
    cfg: SpectralConfig,
    v0: np.ndarray,
    want_high: bool,
    matvec_budget: int,
) -> _LanczosResult:
    """Converge the smallest (and optionally largest) eigenpair.

    Maintains the Arnoldi invariant A B[:k].T = B[:k+1].T M[:k+1, :k], so
    Ritz residuals are read off the coupling row even after restarts.
    """
    cap = max(2, min(cfg.restart_dim, dim))
    basis = np.zeros((cap + 1, dim))
    m_small = np.zeros((cap + 1, cap + 1))
    rng = np.random.default_rng(cfg.seed + dim)

    v = np.asarray(v0, dtype=float).copy()
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:
        v = rng.standard_normal(dim)
        nrm = np.linalg.norm(v)
    basis[0] = v / nrm
    nb = 1                      # orthonormal vectors currently held
    matvecs = 0
    best_low = np.inf
    best_high = -np.inf

    def ritz(k: int):
        theta, vecs = np.linalg.eigh(m_small[:k, :k])
        return theta, vecs

    def extract(k: int, vecs: np.ndarray, col: int) -> np.ndarray:
        x = basis[:k].T @ vecs[:, col]
        n = np.linalg.norm(x)
        return x / n if n > 0 else x

    while True:
        while nb <= cap:
            i = nb - 1
            w = apply_fn(basis[i])
            matvecs += 1
            # Full reorthogonalization, two passes.
            h = basis[:nb] @ w
            w = w - basis[:nb].T @ h
            h2 = basis[:nb] @ w
            w = w - basis[:nb].T @ h2
            h += h2
            m_small[:nb, i] = h
            m_small[i, :nb] = h
            beta = np.linalg.norm(w)
            if beta > 1e-13:
                m_small[nb, i] = beta
                m_small[i, nb] = beta
                basis[nb] = w / beta
            else:
                # Invariant subspace: continue in a fresh random direction.
                m_small[nb, i] = 0.0
                m_small[i, nb] = 0.0
                fresh = rng.standard_normal(dim)
                fresh -= basis[:nb].T @ (basis[:nb] @ fresh)
                fresh -= basis[:nb].T @ (basis[:nb] @ fresh)
                fn = np.linalg.norm(fresh)
                if fn < 1e-12:
                    beta = 0.0
                    nb += 1
                    break
                basis[nb] = fresh / fn
            nb += 1
            k = nb - 1
            if k >= 1 and (k % cfg.check_every == 0 or nb > cap or matvecs >= matvec_budget):
                theta, vecs = ritz(k)
                coupling = m_small[k, :k]
                res = np.abs(coupling @ vecs)
                norm_est = max(abs(theta[0]), abs(theta[-1]), 1e-12)
                target = cfg.tol * norm_est
                best_low = min(best_low, res[0])
                best_high = min(best_high, res[-1]) if want_high else best_high
                done_low = res[0] <= target
                done_high = (not want_high) or res[-1] <= target
                if done_low and done_high:
                    low = _RitzEnd(float(theta[0]), extract(k, vecs, 0), float(res[0]))
                    high = (
                        _RitzEnd(float(theta[-1]), extract(k, vecs, k - 1), float(res[-1]))
                        if want_high
                        else None
                    )
                    return _LanczosResult(low, high, matvecs)
                if matvecs >= matvec_budget:
                    raise ConvergenceError(
                        f"no convergence after {matvecs} products "
                        f"(residual {max(res[0], res[-1] if want_high else 0.0):.3e}, "
                        f"target {target:.3e})",
                        best_residual=float(max(res[0], res[-1] if want_high else 0.0)),
                    )

        # Thick restart: keep extremal Ritz vectors plus the residual vector.
        k = nb - 1
        theta, vecs = ritz(k)
        # Budget both spectrum ends within cap - 1 slots so the basis always
        # has room to expand; a restart that keeps everything cannot progress.
        avail = cap - 1
        n_high = min(cfg.keep_high if want_high else 1, max(0, avail - 1), k)
        n_low = min(cfg.keep_low, k, avail - n_high)
        keep = list(range(n_low)) + list(range(k - n_high, k))
        keep = sorted(set(idx for idx in keep if 0 <= idx < k))
        kk = len(keep)
        kept = vecs[:, keep]
        new_vectors = (basis[:k].T @ kept).T
        residual_vec = basis[k].copy()
        coupling = m_small[k, :k] @ kept
        basis[:kk] = new_vectors
        basis[kk] = residual_vec
        m_small[:, :] = 0.0
        m_small[:kk, :kk] = np.diag(theta[keep])
        m_small[kk, :kk] = coupling
        m_small[:kk, kk] = coupling
        nb = kk + 1


def extremal_eigenpair(
    op,
    which: str = "low",
    config: SpectralConfig | None = None,
    v0: np.ndarray | None = None,
) -> tuple[float, np.ndarray, dict]:
    """Smallest or largest eigenvalue with its eigenvector."""
    cfg = config or SpectralConfig()
    if which not in ("low", "high"):
        raise ConfigError(f"which must be 'low' or 'high', got {which!r}")
    apply_fn, dim = _as_apply(op)
    if dim <= cfg.dense_threshold:
        vals, vecs = np.linalg.eigh(_to_dense(op, dim))
        idx = 0 if which == "low" else dim - 1
        return float(vals[idx]), _canonical_sign(vecs[:, idx]), {
            "matvecs": 0,
            "residual": 0.0,
            "dense": True,
        }
    if which == "high":
        neg = lambda v: -apply_fn(v)
        res = _thick_restart_lanczos(neg, dim, cfg, _start_vector(cfg, dim, v0), False, cfg.max_matvecs)
        return -res.low.value, _canonical_sign(res.low.vector), {
            "matvecs": res.matvecs,
            "residual": res.low.residual_estimate,
            "dense": False,
        }
    res = _thick_restart_lanczos(apply_fn, dim, cfg, _start_vector(cfg, dim, v0), False, cfg.max_matvecs)
    return res.low.value, _canonical_sign(res.low.vector), {
        "matvecs": res.matvecs,
        "residual": res.low.residual_estimate,
        "dense": False,
    }


def _start_vector(cfg: SpectralConfig, dim: int, *hints) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    v = np.zeros(dim)
    used = False
    for h in hints:
        if h is None:
            continue
        h = np.asarray(h, dtype=float)
        n = np.linalg.norm(h)
        if n > 0:
            v += h / n
            used = True
    noise = rng.standard_normal(dim)
    noise /= np.linalg.norm(noise)
    # A small random component keeps all eigenvector directions reachable
    # even when the hints are converged states of a nearby Hamiltonian.
    v += (1e-3 if used else 1.0) * noise
    return v


def ground_and_first_excited(
    op,
    config: SpectralConfig | None = None,
    hints: SpectralHints | None = None,
    s: float | None = None,
) -> SpectralPoint:
    """Two lowest eigenpairs plus the top of the spectrum.

    The first run converges both spectrum ends at once; the second run
    repeats the low end with the ground state shifted up by a penalty
    projector, which exposes the first excited state.
    """
    cfg = config or SpectralConfig()
    hints = hints or SpectralHints()
    apply_fn, dim = _as_apply(op)
    if s is None and isinstance(op, SparseOperator) and op.params is not None:
        s = op.params.s
    if dim < 2:
        raise DegenerateGroundStateError(
            f"sector dimension {dim} admits no spectral gap"
        )

    if dim <= cfg.dense_threshold:
        vals, vecs = np.linalg.eigh(_to_dense(op, dim))
        point = SpectralPoint(
            s=s,
            energy0=float(vals[0]),
            energy1=float(vals[1]),
            energy_max=float(vals[-1]),
            psi0=_canonical_sign(vecs[:, 0]),
            psi1=_canonical_sign(vecs[:, 1]),
            psi_max=_canonical_sign(vecs[:, -1]),
            matvecs=0,
            residual=0.0,
        )
        _check_degeneracy(point, cfg)
        return point

    v0 = _start_vector(cfg, dim, hints.psi0, hints.psi_max)
    first = _thick_restart_lanczos(apply_fn, dim, cfg, v0, True, cfg.max_matvecs)
    e0 = first.low.value
    psi0 = _canonical_sign(first.low.vector)
    e_max = first.high.value
    psi_max = _canonical_sign(first.high.vector)

    penalty = abs(e0) if abs(e0) > 1.0 else 10.0
    budget = cfg.max_matvecs - first.matvecs
    last_error: ConvergenceError | None = None
    for _ in range(cfg.penalty_retries):
        def deflated(v, _p=penalty):
            return apply_fn(v) + (_p * np.dot(psi0, v)) * psi0

        v1 = _start_vector(cfg, dim, hints.psi1)
        v1 -= psi0 * np.dot(psi0, v1)
        try:
            second = _thick_restart_lanczos(deflated, dim, cfg, v1, False, budget)
        except ConvergenceError as err:
            last_error = err
            break
        overlap = abs(np.dot(psi0, second.low.vector))
        if overlap < 1e-4:
            psi1 = second.low.vector - psi0 * np.dot(psi0, second.low.vector)
            psi1 /= np.linalg.norm(psi1)
            psi1 = _canonical_sign(psi1)
            hv = apply_fn(psi1)
            e1 = float(np.dot(psi1, hv))
            resid1 = float(np.linalg.norm(hv - e1 * psi1))
            point = SpectralPoint(
                s=s,
                energy0=e0,
                energy1=e1,
                energy_max=e_max,
                psi0=psi0,
                psi1=psi1,
                psi_max=psi_max,
                matvecs=first.matvecs + second.matvecs + 1,
                residual=max(first.low.residual_estimate, resid1),
            )
            _check_degeneracy(point, cfg)
            return point
        # Penalty too weak: the deflated run found the ground state again.
        penalty *= 10.0
        budget -= second.matvecs
        if budget <= 0:
            break
    raise ConvergenceError(
        "penalized run kept returning the ground state; could not isolate "
        "the first excited state",
        best_residual=(last_error.best_residual if last_error else None),
    )


def _check_degeneracy(point: SpectralPoint, cfg: SpectralConfig) -> None:
    if point.gap < cfg.degeneracy_tol:
        where = f" at s={point.s}" if point.s is not None else ""
        raise DegenerateGroundStateError(
            f"spectral gap {point.gap:.3e} below the degeneracy tolerance "
            f"{cfg.degeneracy_tol:.1e}{where}"
        )


def spectrum_bounds(
    op,
    config: SpectralConfig | None = None,
    hints: SpectralHints | None = None,
) -> tuple[float, float]:
    """Lowest and highest eigenvalue, for window normalization."""
    cfg = config or SpectralConfig()
    hints = hints or SpectralHints()
    apply_fn, dim = _as_apply(op)
    if dim <= cfg.dense_threshold:
        vals = np.linalg.eigvalsh(_to_dense(op, dim))
        return float(vals[0]), float(vals[-1])
    v0 = _start_vector(cfg, dim, hints.psi0, hints.psi_max)
    res = _thick_restart_lanczos(apply_fn, dim, cfg, v0, True, cfg.max_matvecs)
    return res.low.value, res.high.value


def dense_spectrum(op) -> np.ndarray:
    """All eigenvalues, ascending; only for small operators."""
    _, dim = _as_apply(op)
    if dim > 4096:
        raise ConfigError(f"dense spectrum limited to dimension 4096, got {dim}")
    return np.linalg.eigvalsh(_to_dense(op, dim))
