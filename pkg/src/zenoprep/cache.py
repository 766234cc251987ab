"""Persistent store for solved spectral points.

Eigensolves dominate the runtime of schedule optimization, so solved
points are written to disk keyed by a fingerprint of everything that can
change the answer: lattice, couplings, particle sector, and solver
tolerances.  A changed tolerance or coupling produces a different
fingerprint and therefore a clean recompute; stale data is never reused.

Records are numpy ``.npz`` archives written atomically (temp file plus
``os.replace``), so concurrent writers of the same key leave a single
intact winner.  Corrupt or unreadable records are treated as misses and
overwritten on the next save.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .model import HubbardParams, LatticeSpec, SectorSpec
from .spectral import SpectralConfig, SpectralPoint

SCHEMA_VERSION = 1

#: Vectors above this dimension are not persisted; storing multi-gigabyte
#: state vectors costs more than re-running the solver with warm hints.
DEFAULT_VECTOR_LIMIT = 1_000_000

ENV_CACHE_DIR = "ZENOPREP_CACHE_DIR"
DEFAULT_CACHE_DIR = "zenoprep-cache"


def default_cache_dir() -> Path:
    """Cache root: ``$ZENOPREP_CACHE_DIR`` if set, else ``./zenoprep-cache``."""
    override = os.environ.get(ENV_CACHE_DIR, "").strip()
    if override:
        return Path(override)
    return Path(DEFAULT_CACHE_DIR)


def instance_key(
    lattice: LatticeSpec,
    params: HubbardParams,
    sector: SectorSpec,
    spectral: SpectralConfig,
) -> dict:
    """Canonical description of one instance+solver combination."""
    return {
        "schema": SCHEMA_VERSION,
        "m": lattice.m,
        "k": lattice.k,
        "u": float(params.u),
        "t_hop": float(params.t_hop),
        "n_up": sector.n_up,
        "n_down": sector.n_down,
        "tol": float(spectral.tol),
        "degeneracy_tol": float(spectral.degeneracy_tol),
        "seed": int(spectral.seed),
    }


def fingerprint(key: dict) -> str:
    """Order-independent sha256 of a key dictionary."""
    blob = json.dumps(key, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def _point_filename(s: float) -> str:
    # float.hex() is exact and filesystem-safe, so distinct s never collide
    return "s_" + float(s).hex().replace("x", "").replace(".", "_") + ".npz"


class SpectralCache:
    """Disk store for one instance, with the ``load``/``save`` interface
    consumed by the schedule evaluator.

    Parameters
    ----------
    root:
        Cache root directory; records live in a per-fingerprint subtree.
    key:
        Dictionary from :func:`instance_key`.
    vector_limit:
        Skip persisting records whose state vectors exceed this dimension.
    """

    def __init__(self, root: str | Path, key: dict, vector_limit: int = DEFAULT_VECTOR_LIMIT):
        self.root = Path(root)
        self.key = dict(key)
        self.vector_limit = int(vector_limit)
        fp = fingerprint(self.key)
        self.directory = self.root / fp[:2] / fp
        self.hits = 0
        self.misses = 0
        self._wrote_meta = False

    # -- record paths -------------------------------------------------

    def path_for(self, s: float) -> Path:
        return self.directory / _point_filename(s)

    def _write_meta(self) -> None:
        if self._wrote_meta:
            return
        meta = self.directory / "key.json"
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            if not meta.exists():
                _atomic_write_bytes(
                    meta, json.dumps(self.key, sort_keys=True, indent=2).encode("ascii")
                )
        except OSError as exc:  # pragma: no cover - disk trouble only
            warnings.warn(f"cache metadata write failed: {exc}", stacklevel=3)
        self._wrote_meta = True

    # -- store interface ----------------------------------------------

    def load(self, s: float) -> SpectralPoint | None:
        path = self.path_for(s)
        if not path.exists():
            self.misses += 1
            return None
        try:
            point = _read_point(path, s)
        except Exception as exc:
            warnings.warn(
                f"discarding corrupt cache record {path.name}: {exc}", stacklevel=2
            )
            self.misses += 1
            return None
        self.hits += 1
        return point

    def save(self, s: float, point: SpectralPoint) -> None:
        if point.psi0 is not None and point.psi0.size > self.vector_limit:
            return
        self._write_meta()
        try:
            _write_point(self.path_for(s), s, point)
        except OSError as exc:  # pragma: no cover - disk trouble only
            warnings.warn(f"cache write failed for s={s}: {exc}", stacklevel=2)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_point(path: Path, s: float, point: SpectralPoint) -> None:
    arrays = {
        "schema": np.asarray(SCHEMA_VERSION, dtype=np.int64),
        "s": np.asarray(float(s), dtype=np.float64),
        "energies": np.asarray(
            [point.energy0, point.energy1, point.energy_max], dtype=np.float64
        ),
        "matvecs": np.asarray(int(point.matvecs), dtype=np.int64),
        "residual": np.asarray(float(point.residual), dtype=np.float64),
        "psi0": np.asarray(point.psi0, dtype=np.float64),
    }
    # Excited and top states warm-start later solves but never feed fidelity
    # products directly at full precision, so single precision suffices.
    if point.psi1 is not None:
        arrays["psi1"] = np.asarray(point.psi1, dtype=np.float32)
    if point.psi_max is not None:
        arrays["psi_max"] = np.asarray(point.psi_max, dtype=np.float32)

    buffer = io.BytesIO()
    np.savez_compressed(buffer, **arrays)
    _atomic_write_bytes(path, buffer.getvalue())


def _read_point(path: Path, s: float) -> SpectralPoint:
    with np.load(path) as record:
        if int(record["schema"]) != SCHEMA_VERSION:
            raise ValueError(f"schema {int(record['schema'])} != {SCHEMA_VERSION}")
        stored_s = float(record["s"])
        if stored_s != float(s):
            raise ValueError(f"record holds s={stored_s}, expected {s}")
        energies = np.asarray(record["energies"], dtype=np.float64)
        if energies.shape != (3,) or not np.all(np.isfinite(energies)):
            raise ValueError("bad energy triple")
        psi0 = np.asarray(record["psi0"], dtype=np.float64)
        psi1 = None
        psi_max = None
        if "psi1" in record.files:
            psi1 = np.asarray(record["psi1"], dtype=np.float64)
        if "psi_max" in record.files:
            psi_max = np.asarray(record["psi_max"], dtype=np.float64)
        return SpectralPoint(
            s=stored_s,
            energy0=float(energies[0]),
            energy1=float(energies[1]),
            energy_max=float(energies[2]),
            psi0=psi0,
            psi1=psi1,
            psi_max=psi_max,
            matvecs=int(record["matvecs"]),
            residual=float(record["residual"]),
        )


def open_cache(
    cache_dir: str | Path | None,
    lattice: LatticeSpec,
    params: HubbardParams,
    sector: SectorSpec,
    spectral: SpectralConfig,
    vector_limit: int = DEFAULT_VECTOR_LIMIT,
) -> SpectralCache | None:
    """Build the store for an instance, or ``None`` when caching is off.

    ``cache_dir=None`` selects the default location; pass an empty string
    to disable persistence entirely.
    """
    if cache_dir is None:
        root = default_cache_dir()
    elif str(cache_dir) == "":
        return None
    else:
        root = Path(cache_dir)
    key = instance_key(lattice, params, sector, spectral)
    return SpectralCache(root, key, vector_limit=vector_limit)
