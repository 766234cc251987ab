"""Time-to-solution and circuit-depth cost models.

All functions work on plain gap and fidelity arrays so they can be reused
on raw (natural-unit) gaps, window-normalized gaps, or walk-operator gaps.
A measurement step j is characterized by the fidelity F_j between
consecutive ground states and the gap of the target Hamiltonian; the
measurement cost of a step is the inverse of that gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np

from .errors import ConfigError, DivergentSeriesError

DEFAULT_FAILURE_BUDGET = 0.01

# Relative disagreement between the two rewind evaluators above which the
# cost report raises a flag.  The closed-form walk expectation and the
# truncated path series model the bookkeeping differently, so they are not
# expected to coincide exactly.
REWIND_DISAGREEMENT_THRESHOLD = 0.05


def _check_step_arrays(gaps: np.ndarray, fidelities: np.ndarray) -> None:
    if len(gaps) != len(fidelities):
        raise ConfigError(
            f"{len(gaps)} step gaps but {len(fidelities)} fidelities"
        )
    if len(gaps) == 0:
        raise ConfigError("schedule has no measurement steps")
    if np.any(gaps <= 0):
        raise ConfigError("all gaps must be positive")
    if np.any((fidelities < 0) | (fidelities > 1.0 + 1e-12)):
        raise ConfigError("fidelities must lie in [0, 1]")


def repeats(p_success: float, eps: float = DEFAULT_FAILURE_BUDGET) -> float:
    """Expected restarts R with ln(eps) = R ln(1 - p): repetitions needed
    to push the total failure probability below eps."""
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"failure budget must lie in (0, 1), got {eps}")
    if p_success >= 1.0:
        return 1.0
    if p_success <= 0.0:
        return float("inf")
    return log(eps) / log(1.0 - p_success)


def evolution_time(step_gaps: np.ndarray) -> float:
    """Total evolution time of one attempt, sum of inverse step gaps."""
    gaps = np.asarray(step_gaps, dtype=float)
    if np.any(gaps <= 0):
        raise ConfigError("all gaps must be positive")
    return float(np.sum(1.0 / gaps))


def tts_plain(
    step_gaps: np.ndarray,
    fidelities: np.ndarray,
    eps: float = DEFAULT_FAILURE_BUDGET,
) -> float:
    """Restart protocol: any failed measurement reboots the preparation.

    The success probability of an attempt is the product of step
    fidelities, and the time to solution is the expected number of
    attempts times the evolution time of one attempt.
    """
    gaps = np.asarray(step_gaps, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    _check_step_arrays(gaps, fids)
    p = float(np.prod(fids))
    return repeats(p, eps) * evolution_time(gaps)


def restart_expected_cost(step_gaps: np.ndarray, fidelities: np.ndarray) -> float:
    """Exact mean cost of restarting until success.

    Unlike the repeat-budget accounting of :func:`tts_plain`, a failed
    attempt only pays for the steps it actually ran.  Step j is reached
    with probability prod(F_i, i < j) within an attempt, and attempts are
    independent, so the expectation is
    sum_j (1 / gap_j) prod(F_i, i < j) / prod(F).
    """
    gaps = np.asarray(step_gaps, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    _check_step_arrays(gaps, fids)
    p = float(np.prod(fids))
    if p <= 0.0:
        return float("inf")
    reach = np.concatenate([[1.0], np.cumprod(fids[:-1])])
    return float(np.sum(reach / gaps) / p)


def rewind_step_chain(fid: float, gap_prev: float, gap: float) -> float:
    """Expected cost of one rewind step from the absorbing walk.

    A failed measurement alternates between the previous and current
    projectors until the current ground state is hit.  Solving the
    four-state walk gives 1/gap + (1/gap_prev + 1/gap) / (2 F) for F < 1.
    A step with F = 1 never enters the walk, so the cost drops to 1/gap
    discontinuously.
    """
    if gap <= 0 or gap_prev <= 0:
        raise ConfigError("gaps must be positive")
    if not 0.0 < fid <= 1.0 + 1e-12:
        raise DivergentSeriesError(
            f"rewind walk does not terminate for fidelity {fid}"
        )
    if fid >= 1.0:
        return 1.0 / gap
    return 1.0 / gap + (1.0 / gap_prev + 1.0 / gap) / (2.0 * fid)


def rewind_step_series(
    fid: float,
    gap_prev: float,
    gap: float,
    rel_tol: float = 1e-14,
    max_terms: int = 100_000,
) -> float:
    """Path-sum form of the rewind step cost.

    A = F/gap + 2 sum_{k1>=1} sum_{k2=0..k1} (1-F)^(2 k1) F^(2 k2 + 1)
        ((k1 + k2 + 1)/gap + (k1 + k2)/gap_prev)
    truncated once the k1 tail is below rel_tol of the accumulated value.
    """
    if gap <= 0 or gap_prev <= 0:
        raise ConfigError("gaps must be positive")
    if not 0.0 < fid <= 1.0 + 1e-12:
        raise DivergentSeriesError(
            f"rewind series does not converge for fidelity {fid}"
        )
    if fid >= 1.0:
        return 1.0 / gap
    total = fid / gap
    q = (1.0 - fid) ** 2
    for k1 in range(1, max_terms):
        k2 = np.arange(k1 + 1)
        inner = (q**k1) * fid ** (2 * k2 + 1) * ((k1 + k2 + 1) / gap + (k1 + k2) / gap_prev)
        contribution = 2.0 * float(inner.sum())
        total += contribution
        if contribution <= rel_tol * total and k1 >= 4:
            return total
    raise DivergentSeriesError(
        f"rewind series did not settle after {max_terms} outer terms"
    )


def tts_rewind(
    gaps: np.ndarray,
    fidelities: np.ndarray,
    method: str = "chain",
) -> float:
    """Rewind protocol time to solution, summing per-step expected costs.

    ``gaps`` has one more entry than ``fidelities``: entry 0 is the gap of
    the initial Hamiltonian, which prices the backward measurement of the
    first step.
    """
    gaps = np.asarray(gaps, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    if len(gaps) != len(fids) + 1:
        raise ConfigError(
            f"need one more gap than fidelity, got {len(gaps)} and {len(fids)}"
        )
    _check_step_arrays(gaps[1:], fids)
    if gaps[0] <= 0:
        raise ConfigError("all gaps must be positive")
    step = {"chain": rewind_step_chain, "series": rewind_step_series}.get(method)
    if step is None:
        raise ConfigError(f"unknown rewind method {method!r}")
    return float(
        sum(step(f, gp, g) for f, gp, g in zip(fids, gaps[:-1], gaps[1:]))
    )


@dataclass
class CostReport:
    """Cost of one schedule under the restart and rewind protocols."""

    eps: float
    success_probability: float
    repeats: float
    t_total: float
    tts_plain: float
    tts_rewind: float
    tts_rewind_series: float
    rewind_disagreement: float
    rewind_flagged: bool
    units: str = "natural"

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "success_probability": self.success_probability,
            "repeats": self.repeats,
            "t_total": self.t_total,
            "tts_plain": self.tts_plain,
            "tts_rewind": self.tts_rewind,
            "tts_rewind_series": self.tts_rewind_series,
            "rewind_disagreement": self.rewind_disagreement,
            "rewind_flagged": self.rewind_flagged,
            "units": self.units,
        }


def cost_report(
    gaps: np.ndarray,
    fidelities: np.ndarray,
    eps: float = DEFAULT_FAILURE_BUDGET,
    units: str = "natural",
) -> CostReport:
    """Full cost summary; ``gaps`` includes the initial-Hamiltonian gap."""
    gaps = np.asarray(gaps, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    if len(gaps) != len(fids) + 1:
        raise ConfigError(
            f"need one more gap than fidelity, got {len(gaps)} and {len(fids)}"
        )
    _check_step_arrays(gaps[1:], fids)
    p = float(np.prod(fids))
    plain = tts_plain(gaps[1:], fids, eps)
    chain = tts_rewind(gaps, fids, method="chain")
    series = tts_rewind(gaps, fids, method="series")
    disagreement = abs(chain - series) / max(chain, series)
    return CostReport(
        eps=eps,
        success_probability=p,
        repeats=repeats(p, eps),
        t_total=evolution_time(gaps[1:]),
        tts_plain=plain,
        tts_rewind=chain,
        tts_rewind_series=series,
        rewind_disagreement=disagreement,
        rewind_flagged=disagreement > REWIND_DISAGREEMENT_THRESHOLD,
        units=units,
    )


def gain(tts_first: float, tts_second: float) -> float:
    """Ratio of the first method's TTS to the second's; larger than one
    means the second method wins."""
    if tts_first <= 0 or tts_second <= 0:
        raise ConfigError("TTS values must be positive")
    return tts_first / tts_second


@dataclass
class ScalingFit:
    """Least-squares fit of log(tts) = exponent * log(1/gap_min) + offset."""

    exponent: float
    offset: float
    r_squared: float
    n_points: int

    def predict(self, gap_min: float) -> float:
        return float(np.exp(self.exponent * np.log(1.0 / gap_min) + self.offset))


def scaling_fit(gap_mins: np.ndarray, tts_values: np.ndarray) -> ScalingFit:
    x = np.log(1.0 / np.asarray(gap_mins, dtype=float))
    y = np.log(np.asarray(tts_values, dtype=float))
    if len(x) != len(y) or len(x) < 2:
        raise ConfigError("scaling fit needs at least two matching points")
    coeffs, residuals, *_ = np.polyfit(x, y, 1, full=True)
    ss_res = float(residuals[0]) if len(residuals) else 0.0
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(
        exponent=float(coeffs[0]),
        offset=float(coeffs[1]),
        r_squared=r2,
        n_points=len(x),
    )


@dataclass
class DepthEstimate:
    """T-depth of a preparation run under one circuit model."""

    t_depth: float
    model: str
    out_of_model: bool
    per_operation_depth: float | None = None
    synthesis_accuracy: float | None = None
    notes: str = ""


# Product-formula reference point: simulating a 100-qubit system for unit
# times summing to 100 costs about 1e9 T gates.  Spread across the register
# that parallelizes to a circuit depth near 1e7; with no register size the
# serial T count itself bounds the depth.
PF_REFERENCE_TCOUNT = 1e9
PF_REFERENCE_TIME = 100.0
PF_REFERENCE_QUBITS = 100


def tdepth_product_formula(
    t_total: float,
    n_qubits: int | None = None,
    reference_tcount: float = PF_REFERENCE_TCOUNT,
    reference_time: float = PF_REFERENCE_TIME,
    reference_qubits: int = PF_REFERENCE_QUBITS,
) -> DepthEstimate:
    """Depth of implementing the total evolution time with product formulas.

    The T count scales linearly from the reference point (logarithmic
    corrections dropped).  When ``n_qubits`` is given the count is spread
    across the register, one T layer touching each qubit at most once;
    when it is omitted no parallelism is assumed and the depth equals the
    T count.
    """
    if t_total <= 0:
        raise ConfigError("total time must be positive")
    count = reference_tcount * (t_total / reference_time)
    if n_qubits is None:
        return DepthEstimate(
            t_depth=float(count),
            model="product_formula",
            out_of_model=False,
            notes="no parallelization assumed; depth equals the T count",
        )
    if n_qubits < 1:
        raise ConfigError("register must hold at least one qubit")
    out = n_qubits != reference_qubits
    return DepthEstimate(
        t_depth=float(count / n_qubits),
        model="product_formula",
        out_of_model=out,
        notes=(
            "extrapolated away from the reference register size"
            if out
            else ""
        ),
    )


def tdepth_qubitized(
    walk_operations: float,
    gap_min: float,
    n_sites: int = 100,
    n_qubits: int | None = None,
) -> DepthEstimate:
    """Depth of a qubitized run: walk count times the per-operator depth
    3 log2(qubits) log2(1/eps), with synthesis accuracy
    eps = sqrt(gap_min) / (100 n_sites^2)."""
    if walk_operations <= 0:
        raise ConfigError("walk operation count must be positive")
    if gap_min <= 0:
        raise ConfigError("minimal gap must be positive")
    if n_sites < 2:
        raise ConfigError("need at least two sites")
    if n_qubits is None:
        n_qubits = 2 * n_sites
    eps_s = np.sqrt(gap_min) / (100.0 * n_sites**2)
    per_op = 3.0 * np.log2(n_qubits) * np.log2(1.0 / eps_s)
    return DepthEstimate(
        t_depth=float(walk_operations * per_op),
        model="qubitized_walk",
        out_of_model=False,
        per_operation_depth=float(per_op),
        synthesis_accuracy=float(eps_s),
    )
