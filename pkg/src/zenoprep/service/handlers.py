"""Request handlers shared by the HTTP app and the in-process CLI path."""

from __future__ import annotations

import numpy as np

from ..cost import (
    cost_report,
    restart_expected_cost,
    tdepth_product_formula,
    tdepth_qubitized,
    tts_rewind,
)
from ..errors import ConfigError
from ..pipeline import (
    Report,
    build_instance,
    run_pipeline,
    scan_lattices,
    _schedule_table,
    _trace_summary,
)
from ..plotdata import render_files
from ..cache import open_cache
from ..model import sector_dimension
from ..schedule import ScheduleEvaluator, optimize_schedule
from ..walksim import WalkProfile, simulate_exact_projective, simulate_sequence
from . import schemas


def _evaluator(config) -> ScheduleEvaluator:
    lat, params, sec = build_instance(config)
    spectral = config.spectral_config()
    store = open_cache(config.cache_dir, lat, params, sec, spectral)
    return ScheduleEvaluator(
        lat, params, sec, spectral=spectral, store=store, max_dim=config.max_dim
    )


def handle_spectrum(req: schemas.SpectrumRequest) -> schemas.SpectrumResponse:
    config = req.config.to_config()
    if not 0.0 <= req.s <= 1.0:
        raise ConfigError(f"interpolation parameter must lie in [0, 1], got {req.s}")
    evaluator = _evaluator(config)
    point = evaluator.evaluate_point(float(req.s))
    return schemas.SpectrumResponse(
        s=float(req.s),
        energy0=point.energy0,
        energy1=point.energy1,
        energy_max=point.energy_max,
        gap=point.gap,
        residual=point.residual,
        matvecs=point.matvecs,
        dimension=sector_dimension(evaluator.sec),
    )


def handle_schedule(req: schemas.ScheduleRequest) -> schemas.ScheduleResponse:
    config = req.config.to_config()
    objective = req.objective or config.objective or "plain"
    if objective not in ("plain", "rewind"):
        raise ConfigError(f"objective must be plain or rewind, got {objective!r}")
    evaluator = _evaluator(config)
    data, trace = optimize_schedule(evaluator, config.policy(objective))
    return schemas.ScheduleResponse(
        objective=objective,
        schedule=_schedule_table(data, config.qubitization_settings()),
        optimizer=_trace_summary(trace),
    )


def handle_cost(req: schemas.CostRequest) -> schemas.CostResponse:
    report = cost_report(
        np.asarray(req.gaps, dtype=float),
        np.asarray(req.fidelities, dtype=float),
        eps=req.epsilon,
        units=req.units,
    )
    return schemas.CostResponse(cost=report.as_dict())


def handle_simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
    config = req.config.to_config()
    if req.protocol not in ("rewind", "restart"):
        raise ConfigError(f"protocol must be rewind or restart, got {req.protocol!r}")
    trials = req.trials if req.trials is not None else (config.mc_trials or 10_000)
    seed = req.seed if req.seed is not None else config.mc_seed

    if (req.gaps is None) != (req.fidelities is None):
        raise ConfigError("give both gaps and fidelities or neither")

    if req.gaps is not None:
        if req.exact:
            raise ConfigError("exact simulation derives its profile from the instance")
        gaps = tuple(float(g) for g in req.gaps)
        fids = tuple(float(f) for f in req.fidelities)
    else:
        evaluator = _evaluator(config)
        objective = config.objective or (
            "plain" if req.protocol == "restart" else "rewind"
        )
        data, _ = optimize_schedule(evaluator, config.policy(objective))
        if req.exact:
            stats = simulate_exact_projective(
                evaluator.lat,
                evaluator.params,
                evaluator.sec,
                data,
                trials=trials,
                seed=seed,
                protocol=req.protocol,
                qubitized=req.qubitized,
                settings=config.qubitization_settings(),
            )
            return schemas.SimulateResponse(
                protocol=stats.protocol,
                trials=stats.trials,
                seed=stats.seed,
                mean_cost=stats.mean_cost,
                std_error=stats.std_error,
                details={
                    "qubitized": stats.qubitized,
                    "first_step_frequency": stats.first_step_frequency,
                    "expected_first_step": stats.expected_first_step,
                    "step_frequencies": list(stats.step_frequencies),
                    "expected_step_probabilities": list(
                        stats.expected_step_probabilities
                    ),
                    "final_fidelity_min": stats.final_fidelity_min,
                    "max_leakage": stats.max_leakage,
                },
            )
        gaps = tuple(float(g) for g in data.gaps)
        fids = tuple(float(f) for f in data.fidelities)

    profile = WalkProfile(fidelities=fids, gaps=gaps, protocol=req.protocol)
    result = simulate_sequence(profile, trials=trials, seed=seed)
    if req.protocol == "restart":
        analytic = restart_expected_cost(np.asarray(gaps[1:]), np.asarray(fids))
    else:
        analytic = tts_rewind(np.asarray(gaps), np.asarray(fids))
    z = None
    if result.std_error > 0 and np.isfinite(analytic):
        z = float((result.mean_cost - analytic) / result.std_error)
    return schemas.SimulateResponse(
        protocol=req.protocol,
        trials=result.trials,
        seed=result.seed,
        mean_cost=result.mean_cost,
        std_error=result.std_error,
        analytic=analytic,
        z_score=z,
        details={key: value for key, value in result.histogram},
    )


def handle_tdepth(req: schemas.TdepthRequest) -> schemas.TdepthResponse:
    if req.model in ("pf", "product_formula"):
        if req.t_total is None:
            raise ConfigError("product-formula depth needs t_total")
        est = tdepth_product_formula(req.t_total, n_qubits=req.n_qubits)
    elif req.model == "qubitized":
        if req.walk_operations is None or req.gap_min is None:
            raise ConfigError("qubitized depth needs walk_operations and gap_min")
        est = tdepth_qubitized(
            req.walk_operations, req.gap_min, n_sites=req.n_sites, n_qubits=req.n_qubits
        )
    else:
        raise ConfigError(f"depth model must be pf or qubitized, got {req.model!r}")
    return schemas.TdepthResponse(
        t_depth=est.t_depth,
        model=est.model,
        out_of_model=est.out_of_model,
        per_operation_depth=est.per_operation_depth,
        synthesis_accuracy=est.synthesis_accuracy,
        notes=est.notes,
    )


def handle_run(req: schemas.RunRequest) -> schemas.RunResponse:
    report = run_pipeline(req.config.to_config())
    return schemas.RunResponse(report=report.as_dict())


def handle_scan(req: schemas.ScanRequest) -> schemas.ScanResponse:
    config = req.config.to_config()
    result = scan_lattices([(l.m, l.k) for l in req.lattices], config)
    return schemas.ScanResponse(
        reports=[r.as_dict() for r in result.reports], fits=result.fits
    )


def handle_plot_data(req: schemas.PlotDataRequest) -> schemas.PlotDataResponse:
    reports = [Report.from_dict(raw) for raw in req.reports]
    models = tuple(req.models) if req.models else None
    files = render_files(reports, req.fits or None, models)
    return schemas.PlotDataResponse(files=files)
