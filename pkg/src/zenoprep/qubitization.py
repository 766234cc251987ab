"""Walk-operator view of the measurement sequence.

The Hamiltonian of each step, window-normalized into [delta, 2*pi - delta],
is reversed and rescaled to H_bar = I - H / norm and block-encoded through
its Pauli expansion.  Phase estimation then resolves eigenphases of the
walk operator W = -SV, whose relevant gap is acos(1 - gap / norm) instead
of the bare gap; for small gaps this is a large increase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import CapacityError, ConfigError
from .pauli import PauliSum, apply_string, string_matrix
from .schedule import ScheduleData
from .spectral import WindowMap, normalize_to_window

DEFAULT_NORM = 2.0 * np.pi


@dataclass(frozen=True)
class QubitizationSettings:
    norm: float = DEFAULT_NORM          # spectrum normalization of H_bar
    window_delta: float = 0.1           # margin of the energy window
    mode: str = "gapmap"                # "gapmap" or "exact"

    def __post_init__(self):
        if self.norm <= 0:
            raise ConfigError(f"normalization must be positive, got {self.norm}")
        if self.mode not in ("gapmap", "exact"):
            raise ConfigError(f"unknown qubitization mode {self.mode!r}")


def qubitized_gap(gap: float, norm: float = DEFAULT_NORM) -> float:
    """Eigenphase gap acos(1 - gap/norm) of the walk operator."""
    if gap <= 0:
        raise ConfigError(f"gap must be positive, got {gap}")
    x = 1.0 - gap / norm
    if x < -1.0:
        raise ConfigError(
            f"gap {gap} exceeds the encodable range 2*norm = {2 * norm}"
        )
    return float(np.arccos(x))


def walk_gap_crossover(norm: float = DEFAULT_NORM) -> float:
    """Gap below which the walk gap exceeds the bare gap.

    Solves acos(1 - g/norm) = g; near 0.321 for the 2*pi normalization.
    """
    f = lambda g: np.arccos(1.0 - g / norm) - g
    return float(brentq(f, 1e-9, min(2.0 * norm - 1e-9, np.pi), xtol=1e-12))


@dataclass
class WalkOperator:
    """Explicit block encoding of H_bar = sum_l |beta_l|^2 P_l.

    ``prepare`` is the unitary B with B|0> = sum beta_l |l>, ``reflect`` is
    S = B(1 - 2|0><0|)B+, and ``select`` is V = sum |l><l| (x) P_l with the
    coefficient signs folded into the Pauli strings.  The full operator is
    W = S V e^{i pi}.
    """

    strings: tuple[str, ...]
    signs: np.ndarray
    betas: np.ndarray
    n_qubits: int
    norm_used: float        # one-norm of H_bar, must not exceed 1 in theory

    @property
    def n_terms(self) -> int:
        return len(self.strings)

    @property
    def system_dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def dim(self) -> int:
        return self.n_terms * self.system_dim

    def prepare_matrix(self) -> np.ndarray:
        """Unitary B on the ancilla register, first column beta."""
        L = self.n_terms
        b = np.eye(L)
        v = self.betas.copy()
        # Householder reflection mapping e_0 to beta.
        w = v.copy()
        w[0] -= 1.0
        nw = np.linalg.norm(w)
        if nw > 1e-14:
            w /= nw
            b = np.eye(L) - 2.0 * np.outer(w, w)
        return b

    def reflect_matrix(self) -> np.ndarray:
        b = self.prepare_matrix()
        r = np.eye(self.n_terms)
        r[0, 0] = -1.0
        return b @ r @ b.T

    def select_matrix(self) -> np.ndarray:
        if self.dim > 1 << 13:
            raise CapacityError(f"dense walk operator of dimension {self.dim}")
        blocks = np.zeros((self.dim, self.dim), dtype=complex)
        d = self.system_dim
        for l, (s, sgn) in enumerate(zip(self.strings, self.signs)):
            blocks[l * d : (l + 1) * d, l * d : (l + 1) * d] = sgn * string_matrix(s)
        return blocks

    def to_dense(self) -> np.ndarray:
        """W = S V e^{i pi} as a dense unitary on ancilla (x) system."""
        s_full = np.kron(self.reflect_matrix(), np.eye(self.system_dim))
        return -(s_full @ self.select_matrix())

    def apply_select(self, states: np.ndarray) -> np.ndarray:
        """V applied to ancilla-blocked states of shape (..., L, dim)."""
        out = np.empty_like(states, dtype=complex)
        for l, (s, sgn) in enumerate(zip(self.strings, self.signs)):
            out[..., l, :] = sgn * apply_string(s, states[..., l, :])
        return out

    def encode(self, psi: np.ndarray) -> np.ndarray:
        """B|0> (x) psi, flattened to length n_terms * dim."""
        return np.kron(self.betas, psi)

    def select_encoded(self, psi: np.ndarray) -> np.ndarray:
        """V (B|0> (x) psi), flattened; stays real for real inputs when
        every string has an even number of Y factors."""
        blocks = np.stack([b * psi for b in self.betas])
        out = self.apply_select(blocks)
        flat = out.reshape(-1)
        if np.abs(flat.imag).max() < 1e-12:
            return flat.real.copy()
        return flat


def build_walk_operator(
    h_bar: PauliSum, strings: tuple[str, ...] | None = None
) -> WalkOperator:
    """Block encoding of a Pauli sum with nonnegative LCU coefficients
    obtained by moving signs into the strings.

    The encoded operator is H_bar divided by the one-norm of its
    coefficients; eigenvalue arguments of the eigenstate helpers are
    rescaled accordingly.  Passing an explicit string tuple fixes the
    ancilla register, with zero amplitude on absent terms.
    """
    terms = dict(h_bar.simplified().terms)
    if not terms:
        raise ConfigError("cannot block encode an empty Pauli sum")
    if strings is None:
        strings = tuple(sorted(terms))
    else:
        missing = set(terms) - set(strings)
        if missing:
            raise ConfigError(f"term set misses strings {sorted(missing)}")
    coeffs = np.array([terms.get(s, 0.0) for s in strings])
    lam = float(np.sum(np.abs(coeffs)))
    signs = np.where(coeffs >= 0, 1.0, -1.0)
    betas = np.sqrt(np.abs(coeffs) / lam)
    return WalkOperator(
        strings=tuple(strings),
        signs=signs,
        betas=betas,
        n_qubits=h_bar.n_qubits,
        norm_used=lam,
    )


def reversed_hamiltonian(h_windowed: PauliSum, norm: float = DEFAULT_NORM) -> PauliSum:
    """H_bar = I - H/norm as a Pauli sum."""
    return h_windowed.scaled(-1.0 / norm).shifted(1.0)


def walk_eigenphase(walk: WalkOperator, e_bar: float) -> float:
    """Positive eigenphase acos(e_bar / lambda) of the encoded eigenvalue."""
    eta = e_bar / walk.norm_used
    if not -1.0 < eta < 1.0:
        raise ConfigError(
            f"encoded eigenvalue {eta} outside (-1, 1); the block encoding "
            f"norm is {walk.norm_used}"
        )
    return float(np.arccos(eta))


def walk_eigenstate(
    walk: WalkOperator,
    psi: np.ndarray,
    e_bar: float,
    branch: int = +1,
) -> np.ndarray:
    """Eigenvector of W for system eigenstate psi with H_bar eigenvalue
    e_bar, eigenphase branch * acos(e_bar / lambda).

    phi = ((1 -+ i eta / sqrt(1 - eta^2)) B|0> (x) psi
           +- (i / sqrt(1 - eta^2)) V B|0> (x) psi) / sqrt(2)
    with eta the encoded eigenvalue and the upper signs for the positive
    branch.
    """
    if branch not in (+1, -1):
        raise ConfigError(f"branch must be +1 or -1, got {branch}")
    eta = e_bar / walk.norm_used
    if not -1.0 < eta < 1.0:
        raise ConfigError(f"encoded eigenvalue {eta} outside (-1, 1)")
    root = np.sqrt(1.0 - eta * eta)
    u = walk.encode(psi)
    v = walk.select_encoded(psi)
    phi = ((1.0 - branch * 1j * eta / root) * u + branch * (1j / root) * v) / np.sqrt(2.0)
    return phi


def walk_eigenspace_pair(walk: WalkOperator, psi: np.ndarray, e_bar: float):
    """Real orthonormal basis (u, u_perp) of the two-dimensional invariant
    subspace attached to psi; the projector onto it is u u^T + u_perp u_perp^T.

    At an extremal encoded eigenvalue (|e_bar| equal to the block-encoding
    norm, as for a tight Pauli one-norm) the subspace collapses to the
    encoded state itself; the second basis vector is then zero.
    """
    eta = e_bar / walk.norm_used
    root = np.sqrt(max(0.0, 1.0 - eta * eta))
    u = walk.encode(psi)
    v = walk.select_encoded(psi)
    if root < 1e-9:
        return u, np.zeros_like(u)
    u_perp = (v - eta * u) / root
    return u, u_perp


@dataclass(frozen=True)
class CostProfile:
    """Gaps and success probabilities of a schedule in one gap model."""

    svals: tuple[float, ...]
    gaps: tuple[float, ...]             # one per point, including s=0
    fidelities: tuple[float, ...]
    units: str
    mode: str

    @property
    def step_gaps(self) -> np.ndarray:
        return np.asarray(self.gaps[1:])

    @property
    def all_gaps(self) -> np.ndarray:
        return np.asarray(self.gaps)

    @property
    def min_gap(self) -> float:
        return float(min(self.gaps))


def window_maps(data: ScheduleData, delta: float = 0.1) -> list[WindowMap]:
    """Per-point affine maps from the stored spectrum edges."""
    return [
        normalize_to_window(p.energy0, p.energy_max, delta) for p in data.points
    ]


def normalized_profile(data: ScheduleData, delta: float = 0.1) -> CostProfile:
    """Schedule gaps after window normalization, fidelities untouched."""
    maps = window_maps(data, delta)
    gaps = tuple(w.gap(p.gap) for w, p in zip(maps, data.points))
    return CostProfile(
        svals=tuple(p.s for p in data.points),
        gaps=gaps,
        fidelities=data.fidelities,
        units="window",
        mode="normalized",
    )


def qubitize_schedule(
    data: ScheduleData,
    settings: QubitizationSettings | None = None,
    evaluator=None,
) -> CostProfile:
    """Walk-operator gaps for every schedule point.

    In gapmap mode the success probabilities are the stored fidelities and
    only the gaps change, through acos(1 - gap/norm) applied to the
    window-normalized gaps.  Exact mode additionally replays the
    preparation as projections onto the rank-2 walk eigenspaces, which
    requires an evaluator for the eigenvectors and is limited to tiny
    systems.
    """
    settings = settings or QubitizationSettings()
    maps = window_maps(data, settings.window_delta)
    gaps = tuple(
        qubitized_gap(w.gap(p.gap), settings.norm)
        for w, p in zip(maps, data.points)
    )
    svals = tuple(p.s for p in data.points)
    if settings.mode == "gapmap":
        return CostProfile(
            svals=svals,
            gaps=gaps,
            fidelities=data.fidelities,
            units="walk",
            mode="gapmap",
        )
    if evaluator is None:
        raise ConfigError("exact mode needs an evaluator for the eigenvectors")
    fids = _exact_success_probabilities(data, maps, settings, evaluator)
    return CostProfile(
        svals=svals, gaps=gaps, fidelities=fids, units="walk", mode="exact"
    )


def _exact_success_probabilities(
    data: ScheduleData,
    maps: list[WindowMap],
    settings: QubitizationSettings,
    evaluator,
) -> tuple[float, ...]:
    """Success probabilities of successive rank-2 eigenspace projections,
    starting from the encoded initial ground state."""
    from .model import build_hamiltonian, sector_dimension
    from .pauli import pauli_decompose

    dim = sector_dimension(evaluator.sec)
    if dim > 256:
        raise CapacityError(
            f"exact qubitized mode limited to sector dimension 256, got {dim}"
        )
    if dim & (dim - 1):
        raise CapacityError(
            f"exact qubitized mode needs a power-of-two sector dimension, got {dim}"
        )
    h_bars = []
    psis = []
    e_bars = []
    prev_psi = None
    for point, wmap in zip(data.points, maps):
        sp = evaluator.spectral_point(point.s)
        psi = sp.psi0.astype(float)
        if prev_psi is not None and float(prev_psi @ psi) < 0.0:
            psi = -psi
        prev_psi = psi
        op = build_hamiltonian(evaluator.lat, evaluator.params.at(point.s), evaluator.sec)
        h_win = wmap.scale * op.to_dense() + wmap.shift * np.eye(dim)
        h_bars.append(reversed_hamiltonian(pauli_decompose(h_win), settings.norm))
        psis.append(psi)
        e_bars.append(1.0 - wmap.energy(sp.energy0) / settings.norm)

    # A shared ancilla register: union of the term sets along the path.
    union = sorted(set(s for hb in h_bars for s, _ in hb.terms))
    pairs = [
        walk_eigenspace_pair(build_walk_operator(hb, tuple(union)), psi, eb)
        for hb, psi, eb in zip(h_bars, psis, e_bars)
    ]
    state = pairs[0][0].astype(float)   # B|0> (x) psi at s=0
    fids = []
    for u, u_perp in pairs[1:]:
        a = float(state @ u)
        b = float(state @ u_perp)
        p = a * a + b * b
        fids.append(min(p, 1.0))
        proj = a * u + b * u_perp
        n = np.linalg.norm(proj)
        if n < 1e-12:
            raise ConfigError("projected state vanished in exact mode")
        state = proj / n
    return tuple(fids)
