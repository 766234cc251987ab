"""Hubbard problem instances: lattice geometry, particle-number sectors,
and sparse sector Hamiltonians along the kinetic-to-interacting path.

The Hamiltonian is ``H(s) = t_hop * sum_<ij>,sigma (c+_i c_j + c+_j c_i)
+ s * u * sum_i n_up(i) n_dn(i)`` restricted to a fixed (n_up, n_down)
sector.  Fermionic modes are ordered site-major with interleaved spin
(site i -> mode 2i for up, mode 2i+1 for down), which fixes every
hopping sign below.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigError, DegeneracyWarning

DEFAULT_MAX_DIM = 2_000_000


@dataclass(frozen=True)
class LatticeSpec:
    """Open-boundary rectangular lattice, m columns (long side) by k rows."""

    m: int
    k: int
    edges: tuple[tuple[int, int], ...]

    @property
    def n_sites(self) -> int:
        return self.m * self.k


@dataclass(frozen=True)
class HubbardParams:
    """Couplings plus the interpolation parameter s in [0, 1]."""

    u: float
    s: float = 0.0
    t_hop: float = 1.0

    def __post_init__(self):
        if self.u < 0:
            raise ConfigError(f"u must be >= 0, got {self.u}")
        if not 0.0 <= self.s <= 1.0:
            raise ConfigError(f"s must lie in [0, 1], got {self.s}")

    def at(self, s: float) -> "HubbardParams":
        return replace(self, s=s)


@dataclass(frozen=True)
class SectorSpec:
    """Fixed numbers of up and down spins on n_sites sites."""

    n_up: int
    n_down: int
    n_sites: int

    def __post_init__(self):
        for name, n in (("n_up", self.n_up), ("n_down", self.n_down)):
            if not 0 <= n <= self.n_sites:
                raise ConfigError(f"{name}={n} outside [0, {self.n_sites}]")


def build_lattice(m: int, k: int) -> LatticeSpec:
    """Rectangular m-by-k grid with row-major site indexing.

    Site (row r, column c) has index r*m + c; nearest-neighbor edges are
    returned sorted lexicographically.  Callers must orient m >= k.
    """
    if m < 1 or k < 1:
        raise ConfigError(f"lattice sides must be positive, got {m}x{k}")
    if m < k:
        raise ConfigError(f"lattice must satisfy m >= k, got {m}x{k}")
    if m == k and m > 1:
        # Discrete rotation symmetry of the square produces ground-state
        # degeneracies that the preparation protocol cannot handle.
        warnings.warn(
            f"{m}x{k} square lattice is likely to have a degenerate spectrum",
            DegeneracyWarning,
            stacklevel=2,
        )
    edges = []
    for r in range(k):
        for c in range(m):
            site = r * m + c
            if c + 1 < m:
                edges.append((site, site + 1))
            if r + 1 < k:
                edges.append((site, site + m))
    edges.sort()
    return LatticeSpec(m=m, k=k, edges=tuple(edges))


def default_coupling(lat: LatticeSpec) -> float:
    """Coulomb strength rule: twice the coordination number of the bulk."""
    if lat.k == 1:
        return 4.0
    if lat.k == 2:
        return 6.0
    return 8.0


def doped_sector(lat: LatticeSpec, doping: float = 0.10) -> SectorSpec:
    """Sector at the given electron doping above half filling.

    The electron count is rounded to the nearest integer (ties up) and any
    odd electron goes to the up species.
    """
    if not 0.0 <= doping < 1.0:
        raise ConfigError(f"doping must lie in [0, 1), got {doping}")
    n = lat.n_sites
    # round() would use banker's rounding; ties must round up.
    n_e = int(np.floor(np.round((1.0 + doping) * n, 9) + 0.5))
    if n_e > 2 * n:
        raise ConfigError(f"{n_e} electrons exceed the {2 * n} available modes")
    return SectorSpec(n_up=(n_e + 1) // 2, n_down=n_e // 2, n_sites=n)


def sector_dimension(sec: SectorSpec) -> int:
    """Dimension C(N, n_up) * C(N, n_down) of the sector, exact."""
    return comb(sec.n_sites, sec.n_up) * comb(sec.n_sites, sec.n_down)


def occupation_masks(n_sites: int, n_occupied: int) -> np.ndarray:
    """All n_sites-bit masks with the given popcount, ascending (int64).

    The position of a mask in this array is its combinatorial rank; ranking
    is the inverse lookup via searchsorted.
    """
    count = comb(n_sites, n_occupied)
    masks = np.empty(count, dtype=np.int64)
    if n_occupied == 0:
        masks[0] = 0
        return masks
    v = (1 << n_occupied) - 1
    for idx in range(count):
        masks[idx] = v
        # Gosper's hack: next larger integer with the same popcount.
        low = v & -v
        ripple = v + low
        v = ripple | (((v ^ ripple) >> 2) // low)
    return masks


@dataclass(frozen=True)
class SectorBasis:
    """Occupation bitmasks of both spin species; basis index is
    i_up * len(down_masks) + i_down."""

    up_masks: np.ndarray
    down_masks: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.up_masks) * len(self.down_masks)


@lru_cache(maxsize=64)
def sector_basis(sec: SectorSpec) -> SectorBasis:
    up = occupation_masks(sec.n_sites, sec.n_up)
    down = occupation_masks(sec.n_sites, sec.n_down)
    up.setflags(write=False)
    down.setflags(write=False)
    return SectorBasis(up_masks=up, down_masks=down)


def sector_embedding(sec: SectorSpec) -> np.ndarray:
    """Indices of the sector basis states inside the full 4^N Fock space.

    Full-space index bit 2i is the up occupation of site i and bit 2i+1
    the down occupation, matching the interleaved mode order.
    """
    basis = sector_basis(sec)
    up, down = basis.up_masks, basis.down_masks
    spread_up = np.zeros(len(up), dtype=np.int64)
    spread_dn = np.zeros(len(down), dtype=np.int64)
    for i in range(sec.n_sites):
        spread_up |= ((up >> i) & 1) << (2 * i)
        spread_dn |= ((down >> i) & 1) << (2 * i + 1)
    return (spread_up[:, None] | spread_dn[None, :]).ravel()


@dataclass
class SparseOperator:
    """Hermitian sector operator ``scale * (t_hop*K + coulomb*diag(docc)) +
    shift * I`` with matrix-free apply.

    K is the unit-amplitude hopping matrix; docc counts doubly occupied
    sites per basis state.  The affine (scale, shift) wrapper supports
    window normalization without touching the stored matrices.
    """

    dim: int
    kinetic: sp.csr_matrix
    double_occupancy: np.ndarray
    hop: float
    coulomb: float
    scale: float = 1.0
    shift: float = 0.0
    lattice: LatticeSpec | None = None
    params: HubbardParams | None = None
    sector: SectorSpec | None = None

    def apply(self, v: np.ndarray) -> np.ndarray:
        w = self.hop * (self.kinetic @ v) + (self.coulomb * self.double_occupancy) * v
        if self.scale != 1.0 or self.shift != 0.0:
            w = self.scale * w + self.shift * v
        return w

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)

    def to_csr(self) -> sp.csr_matrix:
        h = self.hop * self.kinetic + sp.diags(self.coulomb * self.double_occupancy)
        if self.scale != 1.0 or self.shift != 0.0:
            h = self.scale * h + self.shift * sp.identity(self.dim, format="csr")
        return sp.csr_matrix(h)

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def affine(self, scale: float, shift: float) -> "SparseOperator":
        """Operator scale*H + shift*I sharing the stored matrices."""
        return replace(
            self,
            scale=scale * self.scale,
            shift=scale * self.shift + shift,
        )


def _site_range_mask(first: int, last: int) -> int:
    """Bitmask of sites first..last inclusive (empty when first > last)."""
    if first > last:
        return 0
    return ((1 << (last - first + 1)) - 1) << first


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def _spin_hop_matrix(masks: np.ndarray, i: int, j: int, between: int) -> sp.coo_matrix:
    """Unit-amplitude c+_i c_j + c+_j c_i on one spin species.

    The sign of each transition is the parity of occupied modes strictly
    between the two endpoints of the bond (mask ``between``); occupations
    outside this species contribute through a diagonal factor handled by
    the caller.
    """
    n = len(masks)
    occ_j = (masks >> j) & 1
    occ_i = (masks >> i) & 1
    movable = (occ_j == 1) & (occ_i == 0)
    src = np.nonzero(movable)[0]
    flipped = masks[src] ^ ((1 << i) | (1 << j))
    dst = np.searchsorted(masks, flipped)
    sign = 1.0 - 2.0 * (_popcount(masks[src] & between) & 1)
    rows = np.concatenate([dst, src])
    cols = np.concatenate([src, dst])
    data = np.concatenate([sign, sign])
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n))


@lru_cache(maxsize=16)
def _sector_matrices(lat: LatticeSpec, sec: SectorSpec) -> tuple[sp.csr_matrix, np.ndarray]:
    """Unit-amplitude kinetic matrix and double-occupancy diagonal."""
    basis = sector_basis(sec)
    up, down = basis.up_masks, basis.down_masks
    n_up, n_dn = len(up), len(down)
    parts = []
    for i, j in lat.edges:
        # Interleaved mode order: an up hop on sites (i, j) crosses the down
        # modes of sites i..j-1, a down hop crosses the up modes of i+1..j.
        up_between = _site_range_mask(i + 1, j - 1)
        a_up = _spin_hop_matrix(up, i, j, up_between)
        sgn_dn = 1.0 - 2.0 * (_popcount(down & _site_range_mask(i, j - 1)) & 1)
        parts.append(sp.kron(a_up, sp.diags(sgn_dn)))

        b_dn = _spin_hop_matrix(down, i, j, up_between)
        sgn_up = 1.0 - 2.0 * (_popcount(up & _site_range_mask(i + 1, j)) & 1)
        parts.append(sp.kron(sp.diags(sgn_up), b_dn))
    if parts:
        kinetic = sp.csr_matrix(sum(parts))
    else:
        kinetic = sp.csr_matrix((n_up * n_dn, n_up * n_dn))
    kinetic.sum_duplicates()
    docc = _popcount(up[:, None] & down[None, :]).astype(np.float64).ravel()
    docc.setflags(write=False)
    return kinetic, docc


def build_hamiltonian(
    lat: LatticeSpec,
    params: HubbardParams,
    sec: SectorSpec,
    max_dim: int = DEFAULT_MAX_DIM,
) -> SparseOperator:
    """Sector Hamiltonian H(s) with the Coulomb term scaled by s."""
    if sec.n_sites != lat.n_sites:
        raise ConfigError(
            f"sector defined on {sec.n_sites} sites but lattice has {lat.n_sites}"
        )
    dim = sector_dimension(sec)
    if dim > max_dim:
        raise CapacityError(
            f"sector dimension {dim} exceeds the budget of {max_dim} states"
        )
    kinetic, docc = _sector_matrices(lat, sec)
    return SparseOperator(
        dim=dim,
        kinetic=kinetic,
        double_occupancy=docc,
        hop=params.t_hop,
        coulomb=params.u * params.s,
        lattice=lat,
        params=params,
        sector=sec,
    )
