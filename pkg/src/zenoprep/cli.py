"""Command-line entry point.

Each subcommand builds the same request model the HTTP service accepts
and dispatches it in process by default; ``--server URL`` sends it to a
running service instead.  Configuration comes from an optional JSON file
with individual flags overriding file values.  Results are printed as
JSON on stdout, so output can be piped or archived directly.

Exit codes: 0 success, 2 invalid configuration, 3 capacity limit,
4 solver non-convergence, 5 degenerate ground state, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, ZenoprepError
from .pipeline import RunConfig
from .service import handlers, schemas

EXIT_CODES = {
    "config": 2,
    "capacity": 3,
    "convergence": 4,
    "degeneracy": 5,
}

#: (flag, config key, type) triples for the shared configuration flags.
CONFIG_FLAGS = [
    ("--m", "m", int),
    ("--k", "k", int),
    ("--u", "u", float),
    ("--doping", "doping", float),
    ("--t-hop", "t_hop", float),
    ("--epsilon", "epsilon", float),
    ("--objective", "objective", str),
    ("--patience", "patience", int),
    ("--max-points", "max_points", int),
    ("--min-step", "min_step", float),
    ("--tol", "tol", float),
    ("--max-matvecs", "max_matvecs", int),
    ("--dense-threshold", "dense_threshold", int),
    ("--degeneracy-tol", "degeneracy_tol", float),
    ("--seed", "seed", int),
    ("--window-delta", "window_delta", float),
    ("--norm", "norm", float),
    ("--mode", "mode", str),
    ("--mc-trials", "mc_trials", int),
    ("--mc-seed", "mc_seed", int),
    ("--cache-dir", "cache_dir", str),
    ("--max-dim", "max_dim", int),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON config file")
    for flag, key, kind in CONFIG_FLAGS:
        parser.add_argument(flag, dest=f"cfg_{key}", type=kind, default=None)
    parser.add_argument(
        "--cost-models",
        dest="cfg_cost_models",
        default=None,
        help="comma-separated subset of plain,rewind,qubitized",
    )
    parser.add_argument("--server", metavar="URL", default=None)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge config file and flag overrides into a validated RunConfig."""
    raw: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
    # flatten the nested forms so flag overrides land on one key each
    lattice = raw.pop("lattice", None)
    if isinstance(lattice, dict):
        raw.update(lattice)
    mc = raw.pop("mc", None)
    if isinstance(mc, dict):
        if "trials" in mc:
            raw["mc_trials"] = mc["trials"]
        if "seed" in mc:
            raw["mc_seed"] = mc["seed"]
    for _, key, _kind in CONFIG_FLAGS:
        value = getattr(args, f"cfg_{key}")
        if value is not None:
            raw[key] = value
    if args.cfg_cost_models is not None:
        raw["cost_models"] = [x.strip() for x in args.cfg_cost_models.split(",") if x.strip()]
    return RunConfig.from_dict(raw)


def _config_model(config: RunConfig) -> schemas.RunConfigModel:
    data = config.as_dict()
    # reports are written by this process, never by a remote service
    data["output"] = None
    return schemas.RunConfigModel(**data)


def _dispatch(args: argparse.Namespace, endpoint: str, request) -> dict:
    """Run a request in process, or POST it to ``--server``."""
    if args.server:
        import httpx

        url = args.server.rstrip("/") + "/v1/" + endpoint
        reply = httpx.post(url, json=request.model_dump(mode="json"), timeout=3600.0)
        if reply.status_code != 200:
            try:
                payload = reply.json()
            except ValueError:
                payload = {"error": "error", "detail": reply.text}
            error = ZenoprepError(
                payload.get("detail", f"server returned {reply.status_code}")
            )
            error.code = payload.get("error", "error")
            raise error
        return reply.json()
    handler = {
        "spectrum": handlers.handle_spectrum,
        "schedule": handlers.handle_schedule,
        "cost": handlers.handle_cost,
        "simulate": handlers.handle_simulate,
        "tdepth": handlers.handle_tdepth,
        "run": handlers.handle_run,
        "scan": handlers.handle_scan,
        "plot-data": handlers.handle_plot_data,
    }[endpoint]
    return handler(request).model_dump(mode="json")


def _write_json(payload: dict, output: str) -> None:
    from .cache import _atomic_write_bytes

    text = json.dumps(payload, indent=2, sort_keys=True)
    _atomic_write_bytes(Path(output), (text + "\n").encode("ascii"))


# -- subcommand implementations ---------------------------------------


def cmd_spectrum(args) -> dict:
    request = schemas.SpectrumRequest(config=_config_model(build_config(args)), s=args.s)
    return _dispatch(args, "spectrum", request)


def cmd_schedule(args) -> dict:
    request = schemas.ScheduleRequest(config=_config_model(build_config(args)))
    return _dispatch(args, "schedule", request)


def cmd_cost(args) -> dict:
    if args.report:
        with open(args.report, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        payload = payload.get("report", payload)
        models = payload.get("models", {})
        if args.model not in models:
            raise ConfigError(
                f"report has no {args.model!r} model (present: {sorted(models)})"
            )
        table = models[args.model]["schedule"]
        gaps, fids = table["gap"], table["fidelity"]
    elif args.gaps and args.fidelities:
        gaps, fids = _floats(args.gaps), _floats(args.fidelities)
    else:
        raise ConfigError("give --report FILE or both --gaps and --fidelities")
    epsilon = args.cfg_epsilon if args.cfg_epsilon is not None else 0.01
    request = schemas.CostRequest(
        gaps=gaps, fidelities=fids, epsilon=epsilon, units=args.units
    )
    return _dispatch(args, "cost", request)


def cmd_simulate(args) -> dict:
    request = schemas.SimulateRequest(
        config=_config_model(build_config(args)),
        protocol=args.protocol,
        trials=args.trials,
        seed=args.sim_seed,
        exact=args.exact,
        qubitized=args.qubitized,
        gaps=_floats(args.gaps) if args.gaps else None,
        fidelities=_floats(args.fidelities) if args.fidelities else None,
    )
    return _dispatch(args, "simulate", request)


def cmd_tdepth(args) -> dict:
    request = schemas.TdepthRequest(
        model=args.depth_model,
        t_total=args.t_total,
        walk_operations=args.walk_operations,
        gap_min=args.gap_min,
        n_sites=args.n_sites,
        n_qubits=args.n_qubits,
    )
    return _dispatch(args, "tdepth", request)


def cmd_run(args) -> dict:
    request = schemas.RunRequest(config=_config_model(build_config(args)))
    payload = _dispatch(args, "run", request)
    if args.output:
        _write_json(payload["report"], args.output)
    return payload


def _parse_lattices(text: str) -> list[schemas.LatticeModel]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "x" in item:
            m, k = item.split("x", 1)
            out.append(schemas.LatticeModel(m=int(m), k=int(k)))
        else:
            out.append(schemas.LatticeModel(m=int(item), k=1))
    return out


def cmd_scan(args) -> dict:
    if args.lattices:
        lattices = _parse_lattices(args.lattices)
    elif args.m_range:
        lo, hi = (int(x) for x in args.m_range.split(":", 1))
        lattices = [schemas.LatticeModel(m=m, k=1) for m in range(lo, hi + 1)]
    else:
        raise ConfigError("give --lattices or --m-range")
    if not lattices:
        raise ConfigError("lattice list is empty")
    # the base config only seeds shared settings; each lattice overrides m, k
    if args.cfg_m is None:
        args.cfg_m = lattices[0].m
    config = build_config(args)
    if args.m_range:
        lattices = [schemas.LatticeModel(m=l.m, k=config.k) for l in lattices]
    request = schemas.ScanRequest(config=_config_model(config), lattices=lattices)
    payload = _dispatch(args, "scan", request)
    if args.output:
        _write_json(payload, args.output)
    return payload


def cmd_plot_data(args) -> dict:
    reports: list[dict] = []
    fits: dict = {}
    for path in args.inputs:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if "reports" in payload:
            reports.extend(payload["reports"])
            fits.update(payload.get("fits", {}))
        elif "report" in payload:
            reports.append(payload["report"])
        else:
            reports.append(payload)
    request = schemas.PlotDataRequest(
        reports=reports,
        fits=fits,
        models=[x.strip() for x in args.models.split(",")] if args.models else None,
    )
    reply = _dispatch(args, "plot-data", request)
    out_dir = Path(args.out_dir)
    from .cache import _atomic_write_bytes

    written = []
    for name, text in reply["files"].items():
        target = out_dir / name
        _atomic_write_bytes(target, text.encode("ascii"))
        written.append(str(target))
    return {"written": sorted(written)}


def cmd_serve(args) -> dict:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return {}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zenoprep",
        description="Measurement-driven ground-state preparation estimator "
        "for Hubbard lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="solve one interpolation point")
    _add_config_flags(p)
    p.add_argument("--s", type=float, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("schedule", help="optimize a measurement schedule")
    _add_config_flags(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("cost", help="price an explicit schedule")
    _add_config_flags(p)
    p.add_argument("--report", metavar="FILE", help="take the schedule from a report")
    p.add_argument("--model", default="rewind", help="model within the report")
    p.add_argument("--gaps", help="comma-separated gaps, initial point first")
    p.add_argument("--fidelities", help="comma-separated step fidelities")
    p.add_argument("--units", default="natural")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("simulate", help="Monte Carlo validation")
    _add_config_flags(p)
    p.add_argument("--protocol", choices=("rewind", "restart"), default="rewind")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sim-seed", type=int, default=None)
    p.add_argument("--exact", action="store_true", help="projective state-vector run")
    p.add_argument("--qubitized", action="store_true")
    p.add_argument("--gaps", help="profile override, initial point first")
    p.add_argument("--fidelities", help="profile override")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tdepth", help="T-depth estimates")
    _add_config_flags(p)
    p.add_argument("--depth-model", choices=("pf", "qubitized"), default="pf")
    p.add_argument("--t-total", type=float, default=None)
    p.add_argument("--walk-operations", type=float, default=None)
    p.add_argument("--gap-min", type=float, default=None)
    p.add_argument("--n-sites", type=int, default=100)
    p.add_argument("--n-qubits", type=int, default=None)
    p.set_defaults(func=cmd_tdepth)

    p = sub.add_parser("run", help="full pipeline on one instance")
    _add_config_flags(p)
    p.add_argument("--output", metavar="FILE", help="also write the report here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scan", help="batch over a lattice list")
    _add_config_flags(p)
    p.add_argument("--lattices", help="comma-separated shapes, e.g. 4x1,6x1,4x2")
    p.add_argument("--m-range", help="inclusive chain range lo:hi at the configured k")
    p.add_argument("--output", metavar="FILE", help="also write the scan result here")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("plot-data", help="emit plotting CSVs from reports")
    _add_config_flags(p)
    p.add_argument("inputs", nargs="+", metavar="REPORT", help="report or scan JSON files")
    p.add_argument("--out-dir", default=".", help="directory for the CSV files")
    p.add_argument("--models", help="comma-separated schedule models to emit")
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8123)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    import pydantic

    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except ZenoprepError as exc:
        print(f"error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.code, 1)
    except pydantic.ValidationError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except json.JSONDecodeError as exc:
        print(f"error (config): invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "serve":
        return 0
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
