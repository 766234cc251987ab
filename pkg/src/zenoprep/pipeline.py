"""End-to-end driver: build an instance, optimize schedules, price the
protocols, estimate circuit depth, and assemble a reproducible report.

The report is a plain dictionary-backed structure so that serializing and
reparsing round-trips exactly.  Every scalar lives under a labeled key and
the ``units`` block spells out the unit of each quantity, so downstream
plotting never has to guess.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cache import open_cache
from .cost import (
    CostReport,
    ScalingFit,
    cost_report,
    gain,
    restart_expected_cost,
    scaling_fit,
    tdepth_product_formula,
    tdepth_qubitized,
    tts_rewind,
)
from .errors import ConfigError
from .model import (
    DEFAULT_MAX_DIM,
    HubbardParams,
    LatticeSpec,
    SectorSpec,
    build_lattice,
    default_coupling,
    doped_sector,
    sector_dimension,
)
from .qubitization import (
    DEFAULT_NORM,
    QubitizationSettings,
    normalized_profile,
    qubitize_schedule,
    qubitized_gap,
)
from .schedule import (
    OptimizerPolicy,
    OptimizerTrace,
    ScheduleData,
    ScheduleEvaluator,
    optimize_schedule,
)
from .spectral import SpectralConfig
from .walksim import WalkProfile, simulate_sequence

SCHEMA_VERSION = 1

COST_MODELS = ("plain", "rewind", "qubitized")

#: Unit labels for the headline quantities of a report.
UNIT_LABELS = {
    "tts_plain": "natural time (hbar / hopping energy)",
    "tts_rewind": "natural time (hbar / hopping energy)",
    "tts_qubitized": "walk operations",
    "t_total": "natural time (hbar / hopping energy)",
    "gap": "hopping energy",
    "normalized_gap": "radians (spectrum windowed into [delta, 2 pi - delta])",
    "walk_gap": "radians (walk eigenphase separation)",
    "gain_rewind": "dimensionless (plain TTS / rewind TTS, natural units)",
    "gain_qubitized": "dimensionless (rewind TTS / qubitized TTS, window units)",
    "gain_qubitized_vs_plain": "dimensionless (plain TTS / qubitized TTS, window units)",
    "tdepth_pf": "T gates (sequential)",
    "tdepth_qub": "T gates (sequential)",
    "wall_time_seconds": "seconds",
    "energy": "hopping energy",
}


@dataclass
class RunConfig:
    """Everything needed to reproduce one instance end to end.

    ``u=None`` selects the width-dependent default coupling;
    ``objective=None`` lets each cost model pick its natural optimizer
    objective (plain for the restart model, rewind otherwise).
    ``cache_dir=None`` uses the default cache location and an empty
    string disables persistence.
    """

    m: int
    k: int = 1
    u: float | None = None
    doping: float = 0.0
    t_hop: float = 1.0
    epsilon: float = 0.01
    cost_models: tuple[str, ...] = COST_MODELS
    # optimizer policy
    objective: str | None = None
    patience: int = 5
    max_points: int = 512
    min_step: float = 1e-6
    # eigensolver
    tol: float = 1e-9
    max_matvecs: int = 40_000
    dense_threshold: int = 600
    degeneracy_tol: float = 1e-8
    seed: int = 1905
    # qubitization
    window_delta: float = 0.1
    norm: float = DEFAULT_NORM
    mode: str = "gapmap"
    # Monte Carlo validation (0 trials skips it)
    mc_trials: int = 0
    mc_seed: int = 7
    # plumbing
    cache_dir: str | None = None
    max_dim: int = DEFAULT_MAX_DIM
    output: str | None = None

    def __post_init__(self):
        self.cost_models = tuple(self.cost_models)
        unknown = [c for c in self.cost_models if c not in COST_MODELS]
        if unknown:
            raise ConfigError(f"unknown cost models {unknown}; choose from {COST_MODELS}")
        if not self.cost_models:
            raise ConfigError("at least one cost model is required")
        if self.objective is not None and self.objective not in ("plain", "rewind"):
            raise ConfigError(f"objective must be plain or rewind, got {self.objective!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.mode not in ("gapmap", "exact"):
            raise ConfigError(f"mode must be gapmap or exact, got {self.mode!r}")
        if self.mc_trials < 0:
            raise ConfigError("mc_trials must be non-negative")

    # -- serialization -------------------------------------------------

    _ALIASES = {"u_override": "u"}

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        """Parse a config mapping; unknown keys are rejected, never ignored."""
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a mapping, got {type(raw).__name__}")
        fields = {f.name for f in dataclasses.fields(cls)}
        kwargs: dict = {}
        unknown: list[str] = []
        for key, value in raw.items():
            if key == "schema_version":
                if int(value) != SCHEMA_VERSION:
                    raise ConfigError(
                        f"config schema_version {value} unsupported (expected {SCHEMA_VERSION})"
                    )
                continue
            if key == "lattice":
                if not isinstance(value, dict):
                    raise ConfigError("lattice must be a mapping with keys m, k")
                for sub, subval in value.items():
                    if sub in ("m", "k"):
                        kwargs[sub] = subval
                    else:
                        unknown.append(f"lattice.{sub}")
                continue
            if key == "mc":
                if not isinstance(value, dict):
                    raise ConfigError("mc must be a mapping with keys trials, seed")
                for sub, subval in value.items():
                    if sub == "trials":
                        kwargs["mc_trials"] = subval
                    elif sub == "seed":
                        kwargs["mc_seed"] = subval
                    else:
                        unknown.append(f"mc.{sub}")
                continue
            name = cls._ALIASES.get(key, key)
            if name in fields:
                kwargs[name] = value
            else:
                unknown.append(key)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "m" not in kwargs:
            raise ConfigError("config requires a lattice length m")
        if "cost_models" in kwargs:
            kwargs["cost_models"] = tuple(kwargs["cost_models"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["cost_models"] = list(self.cost_models)
        out["schema_version"] = SCHEMA_VERSION
        return out

    def spectral_config(self) -> SpectralConfig:
        return SpectralConfig(
            tol=self.tol,
            max_matvecs=self.max_matvecs,
            dense_threshold=self.dense_threshold,
            degeneracy_tol=self.degeneracy_tol,
            seed=self.seed,
        )

    def qubitization_settings(self) -> QubitizationSettings:
        return QubitizationSettings(
            norm=self.norm, window_delta=self.window_delta, mode=self.mode
        )

    def policy(self, objective: str) -> OptimizerPolicy:
        return OptimizerPolicy(
            objective=objective,
            eps=self.epsilon,
            patience=self.patience,
            max_points=self.max_points,
            min_step=self.min_step,
        )


@dataclass
class Report:
    """Assembled results of one pipeline run.

    All fields hold JSON-native values, so ``as_dict`` followed by
    ``from_dict`` reproduces an equal report.
    """

    schema_version: int
    created: str
    version: str
    wall_time_seconds: float
    config: dict
    instance: dict
    models: dict
    gains: dict
    depth: dict
    summary: dict
    solver: dict
    units: dict
    mc: list | None = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "Report":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - fields
        if unknown:
            raise ConfigError(f"unknown report keys: {sorted(unknown)}")
        missing = fields - set(raw) - {"mc"}
        if missing:
            raise ConfigError(f"report missing keys: {sorted(missing)}")
        if int(raw["schema_version"]) != SCHEMA_VERSION:
            raise ConfigError(
                f"report schema_version {raw['schema_version']} unsupported"
            )
        return cls(**{name: raw.get(name) for name in fields})


def build_instance(
    config: RunConfig,
) -> tuple[LatticeSpec, HubbardParams, SectorSpec]:
    """Lattice, couplings, and particle sector for a config."""
    lat = build_lattice(config.m, config.k)
    u = config.u if config.u is not None else default_coupling(lat)
    params = HubbardParams(u=u, t_hop=config.t_hop)
    sec = doped_sector(lat, config.doping)
    return lat, params, sec


def _schedule_table(
    data: ScheduleData, settings: QubitizationSettings
) -> dict:
    """Per-point schedule columns plus per-step fidelities."""
    norm_prof = normalized_profile(data, delta=settings.window_delta)
    walk_gaps = [qubitized_gap(g, settings.norm) for g in norm_prof.gaps]
    return {
        "s": [p.s for p in data.points],
        "energy0": [p.energy0 for p in data.points],
        "energy1": [p.energy1 for p in data.points],
        "energy_max": [p.energy_max for p in data.points],
        "gap": [float(g) for g in data.gaps],
        "normalized_gap": [float(g) for g in norm_prof.gaps],
        "walk_gap": [float(g) for g in walk_gaps],
        "fidelity": [float(f) for f in data.fidelities],
    }


def _trace_summary(trace: OptimizerTrace) -> dict:
    return {
        "stop_reason": trace.stop_reason,
        "initial_cost": trace.initial_cost,
        "final_cost": trace.final_cost,
        "evaluations": trace.evaluations,
        "iterations": len(trace.steps),
        "inserted_s": [st.inserted_s for st in trace.steps],
        "improved_steps": sum(1 for st in trace.steps if st.improved),
    }


def _cost_dict(report: CostReport) -> dict:
    return report.as_dict()


def run_pipeline(config: RunConfig, store=None) -> Report:
    """Execute the full flow for one instance and assemble the report.

    ``store`` overrides the persistent cache (mainly for tests); by
    default it is opened according to ``config.cache_dir``.
    """
    start = time.perf_counter()
    lat, params, sec = build_instance(config)
    spectral = config.spectral_config()
    settings = config.qubitization_settings()
    if store is None:
        store = open_cache(config.cache_dir, lat, params, sec, spectral)
    evaluator = ScheduleEvaluator(
        lat, params, sec, spectral=spectral, store=store, max_dim=config.max_dim
    )

    # One optimization per distinct objective; models sharing an objective
    # share the schedule, and the evaluator memoizes every solved point.
    schedules: dict[str, tuple[ScheduleData, OptimizerTrace]] = {}

    def _optimized(objective: str) -> tuple[ScheduleData, OptimizerTrace]:
        if objective not in schedules:
            schedules[objective] = optimize_schedule(evaluator, config.policy(objective))
        return schedules[objective]

    models: dict[str, dict] = {}
    headline: dict[str, float | None] = {
        "tts_plain": None,
        "tts_rewind": None,
        "tts_qubitized": None,
        "tts_plain_window": None,
        "tts_rewind_window": None,
    }
    rewind_like_data: ScheduleData | None = None

    for model in config.cost_models:
        objective = config.objective or ("plain" if model == "plain" else "rewind")
        data, trace = _optimized(objective)
        natural = cost_report(data.gaps, data.fidelities, eps=config.epsilon)
        norm_prof = normalized_profile(data, delta=settings.window_delta)
        windowed = cost_report(
            norm_prof.gaps, norm_prof.fidelities, eps=config.epsilon, units="window"
        )
        entry = {
            "objective": objective,
            "schedule": _schedule_table(data, settings),
            "optimizer": _trace_summary(trace),
            "cost_natural": _cost_dict(natural),
            "cost_window": _cost_dict(windowed),
        }
        if model == "plain":
            headline["tts_plain"] = natural.tts_plain
            headline["tts_plain_window"] = windowed.tts_plain
        elif model == "rewind":
            headline["tts_rewind"] = natural.tts_rewind
            headline["tts_rewind_window"] = windowed.tts_rewind
            rewind_like_data = data
        else:
            walk_prof = qubitize_schedule(data, settings, evaluator=evaluator)
            walked = cost_report(
                walk_prof.gaps, walk_prof.fidelities, eps=config.epsilon, units="walk"
            )
            entry["cost_walk"] = _cost_dict(walked)
            entry["walk_mode"] = walk_prof.mode
            headline["tts_qubitized"] = walked.tts_rewind
            if headline["tts_rewind_window"] is None:
                headline["tts_rewind_window"] = windowed.tts_rewind
            if rewind_like_data is None:
                rewind_like_data = data
        models[model] = entry

    gains: dict[str, float | None] = {
        "rewind_vs_plain": None,
        "qubitized_vs_rewind": None,
        "qubitized_vs_plain": None,
    }
    if headline["tts_plain"] is not None and headline["tts_rewind"] is not None:
        gains["rewind_vs_plain"] = gain(headline["tts_plain"], headline["tts_rewind"])
    if headline["tts_qubitized"] is not None:
        if headline["tts_rewind_window"] is not None:
            gains["qubitized_vs_rewind"] = gain(
                headline["tts_rewind_window"], headline["tts_qubitized"]
            )
        if headline["tts_plain_window"] is not None:
            gains["qubitized_vs_plain"] = gain(
                headline["tts_plain_window"], headline["tts_qubitized"]
            )

    # Depth estimates price the rewind run (fall back to plain when the
    # rewind model was not requested).
    any_data = rewind_like_data or _optimized(
        config.objective or ("plain" if "plain" in config.cost_models else "rewind")
    )[0]
    gap_min = float(any_data.min_gap)
    pf_time = headline["tts_rewind"] or headline["tts_plain"]
    n_qubits = 2 * lat.n_sites
    depth: dict[str, dict | None] = {"product_formula": None, "qubitized": None}
    if pf_time is not None:
        depth["product_formula"] = dataclasses.asdict(
            tdepth_product_formula(pf_time, n_qubits=n_qubits)
        )
    if headline["tts_qubitized"] is not None:
        depth["qubitized"] = dataclasses.asdict(
            tdepth_qubitized(
                headline["tts_qubitized"],
                gap_min,
                n_sites=lat.n_sites,
                n_qubits=n_qubits,
            )
        )

    mc_rows = None
    if config.mc_trials > 0:
        mc_rows = _mc_validation(any_data, config)

    summary = {
        "m": lat.m,
        "k": lat.k,
        "n_sites": lat.n_sites,
        "shape": f"{lat.m}x{lat.k}",
        "gap_min": gap_min,
        "tts_plain": headline["tts_plain"],
        "tts_rewind": headline["tts_rewind"],
        "tts_qubitized": headline["tts_qubitized"],
        "gain_rewind": gains["rewind_vs_plain"],
        "gain_qubitized": gains["qubitized_vs_rewind"],
        "tdepth_pf": depth["product_formula"]["t_depth"]
        if depth["product_formula"]
        else None,
        "tdepth_qub": depth["qubitized"]["t_depth"] if depth["qubitized"] else None,
    }

    solver = {
        "points_evaluated": len(evaluator._points),
        "eigensolves": evaluator.solves,
        "matvecs": int(sum(p.matvecs for p in evaluator._points.values())),
        "cache_hits": getattr(store, "hits", 0) if store is not None else 0,
        "cache_misses": getattr(store, "misses", 0) if store is not None else 0,
        "dimension": sector_dimension(sec),
    }

    instance = {
        "m": lat.m,
        "k": lat.k,
        "shape": f"{lat.m}x{lat.k}",
        "n_sites": lat.n_sites,
        "n_edges": len(lat.edges),
        "u": params.u,
        "t_hop": params.t_hop,
        "doping": config.doping,
        "n_up": sec.n_up,
        "n_down": sec.n_down,
        "dimension": sector_dimension(sec),
    }

    report = Report(
        schema_version=SCHEMA_VERSION,
        created=datetime.now(timezone.utc).isoformat(),
        version=__version__,
        wall_time_seconds=time.perf_counter() - start,
        config=config.as_dict(),
        instance=instance,
        models=models,
        gains=gains,
        depth=depth,
        summary=summary,
        solver=solver,
        units=dict(UNIT_LABELS),
        mc=mc_rows,
    )
    if config.output:
        write_report(report, config.output)
    return report


def _mc_validation(data: ScheduleData, config: RunConfig) -> list:
    """Abstract-walk Monte Carlo against the closed-form expectations."""
    fids = tuple(float(f) for f in data.fidelities)
    gaps = tuple(float(g) for g in data.gaps)
    rows = []
    for protocol in ("restart", "rewind"):
        profile = WalkProfile(fidelities=fids, gaps=gaps, protocol=protocol)
        result = simulate_sequence(profile, trials=config.mc_trials, seed=config.mc_seed)
        if protocol == "restart":
            analytic = restart_expected_cost(np.asarray(gaps[1:]), np.asarray(fids))
        else:
            analytic = tts_rewind(np.asarray(gaps), np.asarray(fids))
        z = 0.0
        if result.std_error > 0:
            z = (result.mean_cost - analytic) / result.std_error
        rows.append(
            {
                "protocol": protocol,
                "trials": result.trials,
                "seed": result.seed,
                "mean_cost": result.mean_cost,
                "std_error": result.std_error,
                "analytic": analytic,
                "z_score": z,
            }
        )
    return rows


def write_report(report: Report, path: str | Path) -> None:
    """Serialize a report to JSON; the file appears only when complete."""
    from .cache import _atomic_write_bytes

    payload = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    _atomic_write_bytes(Path(path), payload.encode("ascii"))


def load_report(path: str | Path) -> Report:
    with open(path, "r", encoding="ascii") as handle:
        return Report.from_dict(json.load(handle))


@dataclass
class ScanResult:
    """Batch of reports over a lattice family plus scaling fits."""

    reports: list
    fits: dict

    def as_dict(self) -> dict:
        return {"reports": [r.as_dict() for r in self.reports], "fits": self.fits}


def scan_lattices(
    lattices: list[tuple[int, int]], base: RunConfig, store_factory=None
) -> ScanResult:
    """Run the pipeline over a list of (m, k) shapes and fit TTS scaling.

    Fits are grouped by lattice width k; each family with at least two
    members gets a log-log fit of TTS against the inverse minimal gap for
    every cost model present.
    """
    if not lattices:
        raise ConfigError("scan needs at least one lattice")
    reports = []
    for m, k in lattices:
        config = dataclasses.replace(base, m=int(m), k=int(k), output=None)
        store = store_factory(config) if store_factory is not None else None
        reports.append(run_pipeline(config, store=store))

    fits: dict[str, dict] = {}
    by_family: dict[int, list[Report]] = {}
    for rep in reports:
        by_family.setdefault(rep.instance["k"], []).append(rep)
    for k, members in sorted(by_family.items()):
        if len(members) < 2:
            continue
        gap_mins = np.array([r.summary["gap_min"] for r in members])
        family: dict[str, dict] = {}
        for key in ("tts_plain", "tts_rewind", "tts_qubitized"):
            values = [r.summary[key] for r in members]
            if any(v is None or not np.isfinite(v) for v in values):
                continue
            fit = scaling_fit(gap_mins, np.array(values, dtype=float))
            family[key] = dataclasses.asdict(fit)
        if family:
            fits[f"k={k}"] = family
    return ScanResult(reports=reports, fits=fits)
