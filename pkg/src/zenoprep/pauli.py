"""Pauli-string representations of fermionic Hamiltonians.

Strings are indexed by mode: character p of a string acts on qubit p,
and qubit p stores the occupation of fermionic mode p (site i maps to
modes 2i for spin up and 2i+1 for spin down).  Dense reconstructions
use the matching little-endian convention, bit p of the row index being
qubit p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .model import HubbardParams, LatticeSpec

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

DENSE_QUBIT_LIMIT = 14


def string_matrix(s: str) -> np.ndarray:
    """Dense matrix of one Pauli string (little-endian qubit order)."""
    if len(s) > DENSE_QUBIT_LIMIT:
        raise CapacityError(f"refusing dense matrix on {len(s)} qubits")
    out = np.eye(1, dtype=complex)
    for ch in reversed(s):
        out = np.kron(out, _SINGLE[ch])
    return out


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Pauli strings on a fixed register."""

    n_qubits: int
    terms: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for s, _ in self.terms:
            if len(s) != self.n_qubits:
                raise ConfigError(
                    f"term {s!r} has {len(s)} characters, expected {self.n_qubits}"
                )
            if any(ch not in _SINGLE for ch in s):
                raise ConfigError(f"term {s!r} contains characters outside IXYZ")

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def one_norm(self) -> float:
        """Sum of absolute coefficients, the normalization of the
        block encoding."""
        return float(sum(abs(c) for _, c in self.terms))

    def simplified(self, tol: float = 1e-12) -> "PauliSum":
        merged: dict[str, float] = {}
        for s, c in self.terms:
            merged[s] = merged.get(s, 0.0) + c
        kept = tuple(
            (s, c) for s, c in sorted(merged.items()) if abs(c) > tol
        )
        return PauliSum(self.n_qubits, kept)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(
            self.n_qubits, tuple((s, factor * c) for s, c in self.terms)
        )

    def shifted(self, offset: float) -> "PauliSum":
        """Add offset times the identity string."""
        ident = "I" * self.n_qubits
        return PauliSum(self.n_qubits, self.terms + ((ident, offset),)).simplified()

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > DENSE_QUBIT_LIMIT:
            raise CapacityError(f"refusing dense matrix on {self.n_qubits} qubits")
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for s, c in self.terms:
            out += c * string_matrix(s)
        return out


def apply_string(s: str, vec: np.ndarray) -> np.ndarray:
    """Apply one Pauli string to a state vector without forming the matrix.

    Basis index bit p is qubit p.  X and Y permute indices by flipping
    their bit; Y and Z contribute phases per occupation.
    """
    n = len(s)
    dim = 1 << n
    vec = np.asarray(vec)
    if vec.shape[-1] != dim:
        raise ConfigError(f"vector length {vec.shape[-1]} does not match {n} qubits")
    flip = 0
    z_mask = 0
    y_mask = 0
    for p, ch in enumerate(s):
        if ch == "X":
            flip |= 1 << p
        elif ch == "Y":
            flip |= 1 << p
            y_mask |= 1 << p
        elif ch == "Z":
            z_mask |= 1 << p
    idx = np.arange(dim)
    # Per Y bit the factor is i on an empty bit and -i on an occupied one;
    # per Z bit it is (-1)^occupation.
    phase = np.ones(dim, dtype=complex)
    if y_mask:
        n_y = bin(y_mask).count("1")
        occ_y = np.bitwise_count(idx & y_mask).astype(np.int64)
        phase = (1j**n_y) * ((-1.0) ** occ_y)
    if z_mask:
        occ_z = np.bitwise_count(idx & z_mask).astype(np.int64)
        phase = phase * ((-1.0) ** occ_z)
    out = np.zeros(vec.shape, dtype=np.result_type(vec.dtype, phase.dtype))
    out[..., idx ^ flip] = phase * vec[..., idx]
    return out


def _z_run(n: int, a: int, b: int, ends: str) -> str:
    """String with the given end characters at a < b and Z in between."""
    chars = ["I"] * n
    for p in range(a + 1, b):
        chars[p] = "Z"
    chars[a] = ends
    chars[b] = ends
    return "".join(chars)


def hopping_strings(n_modes: int, a: int, b: int, amplitude: float):
    """Pauli terms of amplitude * (c+_a c_b + c+_b c_a) for modes a < b."""
    if not 0 <= a < b < n_modes:
        raise ConfigError(f"modes ({a}, {b}) invalid on {n_modes} modes")
    half = 0.5 * amplitude
    return [(_z_run(n_modes, a, b, "X"), half), (_z_run(n_modes, a, b, "Y"), half)]


def onsite_strings(n_modes: int, site: int, strength: float):
    """Pauli terms of strength * n_up(site) * n_dn(site); the number
    operator is (1 - Z)/2 on each mode."""
    a, b = 2 * site, 2 * site + 1
    quarter = 0.25 * strength
    ident = "I" * n_modes
    za = ident[:a] + "Z" + ident[a + 1 :]
    zb = ident[:b] + "Z" + ident[b + 1 :]
    zz = za[:b] + "Z" + za[b + 1 :]
    return [(ident, quarter), (za, -quarter), (zb, -quarter), (zz, quarter)]


def jordan_wigner(lat: LatticeSpec, params: HubbardParams) -> PauliSum:
    """Full-register Pauli form of the Hubbard Hamiltonian at the given s."""
    n_modes = 2 * lat.n_sites
    terms: list[tuple[str, float]] = []
    for i, j in lat.edges:
        for spin in (0, 1):
            terms.extend(
                hopping_strings(n_modes, 2 * i + spin, 2 * j + spin, params.t_hop)
            )
    strength = params.u * params.s
    if strength != 0.0:
        for site in range(lat.n_sites):
            terms.extend(onsite_strings(n_modes, site, strength))
    return PauliSum(n_modes, tuple(terms)).simplified()


def pauli_decompose(h: np.ndarray, tol: float = 1e-12) -> PauliSum:
    """Exact Pauli expansion of a Hermitian matrix on 2^n dimensions.

    Recursively splits on the most significant qubit; coefficients of a
    Hermitian matrix in the Hermitian string basis are real.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {h.shape}")
    dim = h.shape[0]
    n = max(dim - 1, 0).bit_length()
    if dim != 1 << n or dim == 0:
        raise ConfigError(f"dimension {dim} is not a power of two")
    if np.abs(h - h.conj().T).max() > 1e-9:
        raise ConfigError("matrix is not Hermitian")

    def split(block: np.ndarray, qubits: int) -> dict[str, complex]:
        if qubits == 0:
            return {"": block[0, 0]}
        half = block.shape[0] // 2
        a = block[:half, :half]
        b = block[:half, half:]
        c = block[half:, :half]
        d = block[half:, half:]
        # Components along I, X, Y, Z of the top (most significant) qubit.
        pieces = {
            "I": 0.5 * (a + d),
            "X": 0.5 * (b + c),
            "Y": 0.5j * (b - c),
            "Z": 0.5 * (a - d),
        }
        out: dict[str, complex] = {}
        for ch, piece in pieces.items():
            if np.abs(piece).max() <= tol:
                continue
            for suffix, coeff in split(piece, qubits - 1).items():
                out[suffix + ch] = coeff
        return out

    raw = split(h, n)
    terms = []
    for s, c in sorted(raw.items()):
        if abs(c) <= tol:
            continue
        if abs(c.imag) > 1e-9:
            raise ConfigError(f"non-real coefficient {c} for string {s!r}")
        terms.append((s, float(c.real)))
    return PauliSum(n, tuple(terms))
