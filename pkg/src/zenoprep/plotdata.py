"""CSV emission for external plotting.

Two table kinds are produced.  The summary table has one row per
instance with the headline quantities (minimal gap, TTS under each
protocol, gains, and T-depths), which is what a log-log TTS versus
inverse-gap plot consumes.  The per-schedule table lists one row per
interpolation point with the step fidelity and the gap in natural,
window, and walk units.

Both formats carry a version marker in a leading comment line, and
scaling-fit results are appended as ``#fit`` footer records; every
comment line starts with ``#`` so standard loaders can skip them.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .cache import _atomic_write_bytes
from .errors import ConfigError
from .pipeline import Report, ScanResult

FORMAT_VERSION = 1

SUMMARY_COLUMNS = (
    "n_sites",
    "shape",
    "delta_min",
    "tts_plain",
    "tts_rewind",
    "tts_qubitized",
    "gain_rewind",
    "gain_qubitized",
    "tdepth_pf",
    "tdepth_qub",
)

SCHEDULE_COLUMNS = (
    "s",
    "fidelity",
    "gap",
    "energy0",
    "energy1",
    "energy_max",
    "normalized_gap",
    "walk_gap",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_row(report: Report) -> dict:
    """Headline quantities of one report keyed by summary column name."""
    s = report.summary
    return {
        "n_sites": s["n_sites"],
        "shape": s["shape"],
        "delta_min": s["gap_min"],
        "tts_plain": s["tts_plain"],
        "tts_rewind": s["tts_rewind"],
        "tts_qubitized": s["tts_qubitized"],
        "gain_rewind": s["gain_rewind"],
        "gain_qubitized": s["gain_qubitized"],
        "tdepth_pf": s["tdepth_pf"],
        "tdepth_qub": s["tdepth_qub"],
    }


def render_summary_csv(reports: list, fits: dict | None = None) -> str:
    """Summary table text: version comment, header, one row per report,
    then one ``#fit`` footer record per lattice family and cost model."""
    if not reports:
        raise ConfigError("plot data needs at least one report")
    buffer = io.StringIO()
    buffer.write(f"# zenoprep summary csv v{FORMAT_VERSION}\n")
    writer = csv.DictWriter(buffer, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerow({k: _cell(v) for k, v in summary_row(report).items()})
    for family in sorted(fits or {}):
        for model, fit in sorted((fits or {})[family].items()):
            buffer.write(
                "#fit,%s,%s,exponent=%s,offset=%s,r_squared=%s,n_points=%d\n"
                % (
                    family,
                    model,
                    repr(fit["exponent"]),
                    repr(fit["offset"]),
                    repr(fit["r_squared"]),
                    fit["n_points"],
                )
            )
    return buffer.getvalue()


def render_schedule_csv(report: Report, model: str) -> str:
    """Per-schedule table for one cost model: a row per interpolation
    point.  The fidelity column holds the step fidelity of the measurement
    arriving at that point, so the first row leaves it empty."""
    if model not in report.models:
        raise ConfigError(
            f"report has no {model!r} model (present: {sorted(report.models)})"
        )
    table = report.models[model]["schedule"]
    n = len(table["s"])
    buffer = io.StringIO()
    buffer.write(
        f"# zenoprep schedule csv v{FORMAT_VERSION} "
        f"shape={report.summary['shape']} model={model}\n"
    )
    writer = csv.DictWriter(buffer, fieldnames=SCHEDULE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for j in range(n):
        writer.writerow(
            {
                "s": _cell(table["s"][j]),
                "fidelity": _cell(table["fidelity"][j - 1]) if j > 0 else "",
                "gap": _cell(table["gap"][j]),
                "energy0": _cell(table["energy0"][j]),
                "energy1": _cell(table["energy1"][j]),
                "energy_max": _cell(table["energy_max"][j]),
                "normalized_gap": _cell(table["normalized_gap"][j]),
                "walk_gap": _cell(table["walk_gap"][j]),
            }
        )
    return buffer.getvalue()


def render_files(
    reports: list, fits: dict | None = None, models: tuple[str, ...] | None = None
) -> dict[str, str]:
    """All plot tables keyed by file name: the summary plus one schedule
    table per report and cost model."""
    files = {"summary.csv": render_summary_csv(reports, fits)}
    for report in reports:
        shape = report.summary["shape"]
        for model in models or tuple(report.models):
            if model not in report.models:
                continue
            files[f"schedule_{shape}_{model}.csv"] = render_schedule_csv(report, model)
    return files


def emit_plot_data(
    source: ScanResult | list, out_dir: str | Path, models: tuple[str, ...] | None = None
) -> list[Path]:
    """Write the summary CSV and one schedule CSV per report and model.

    ``source`` is either a scan result (fits included in the footer) or a
    bare list of reports.  Returns the written paths.
    """
    if isinstance(source, ScanResult):
        reports, fits = source.reports, source.fits
    else:
        reports, fits = list(source), None
    out = Path(out_dir)
    written: list[Path] = []
    for name, text in render_files(reports, fits, models).items():
        path = out / name
        _atomic_write_bytes(path, text.encode("ascii"))
        written.append(path)
    return written
