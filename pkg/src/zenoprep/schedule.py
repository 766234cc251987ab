"""Measurement schedules along the interpolation path and their
optimization.

A schedule is a list of s values from 0 to 1.  Between consecutive points
the protocol measures the ground-state projector of the next Hamiltonian,
so the relevant data are the per-point gaps and the fidelities between
consecutive ground states.  The optimizer repeatedly bisects the weakest
link until the time to solution stops improving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cost
from .errors import ConfigError, StepFloorError
from .model import (
    HubbardParams,
    LatticeSpec,
    SectorSpec,
    build_hamiltonian,
    sector_dimension,
)
from .model import DEFAULT_MAX_DIM
from .spectral import (
    SpectralConfig,
    SpectralHints,
    SpectralPoint,
    fidelity,
    ground_and_first_excited,
)

# Above this sector dimension the warm-start vectors are kept in single
# precision; they only seed Lanczos runs, so the lost digits are irrelevant.
HINT_COMPRESS_DIM = 100_000


@dataclass(frozen=True)
class SchedulePoint:
    """Spectral summary of one Hamiltonian in the sequence."""

    s: float
    energy0: float
    energy1: float
    energy_max: float

    @property
    def gap(self) -> float:
        return self.energy1 - self.energy0

    @property
    def spread(self) -> float:
        return self.energy_max - self.energy0


@dataclass(frozen=True)
class ScheduleData:
    """Evaluated schedule: points at ascending s plus link fidelities."""

    points: tuple[SchedulePoint, ...]
    fidelities: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ConfigError("a schedule needs at least the two endpoints")
        if len(self.fidelities) != len(self.points) - 1:
            raise ConfigError(
                f"{len(self.points)} points need {len(self.points) - 1} "
                f"fidelities, got {len(self.fidelities)}"
            )
        svals = [p.s for p in self.points]
        if abs(svals[0]) > 1e-12 or abs(svals[-1] - 1.0) > 1e-12:
            raise ConfigError("schedule must start at s=0 and end at s=1")
        if any(b < a for a, b in zip(svals, svals[1:])):
            raise ConfigError("schedule s values must be non-decreasing")
        if any(not 0.0 <= f <= 1.0 + 1e-12 for f in self.fidelities):
            raise ConfigError("fidelities must lie in [0, 1]")

    @property
    def svals(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def gaps(self) -> np.ndarray:
        """Gap at every point, including the initial Hamiltonian."""
        return np.array([p.gap for p in self.points])

    @property
    def step_gaps(self) -> np.ndarray:
        """Gap at each measured point, excluding s=0."""
        return np.array([p.gap for p in self.points[1:]])

    @property
    def min_gap(self) -> float:
        return float(min(p.gap for p in self.points))

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1

    def success_probability(self) -> float:
        return float(np.prod(self.fidelities))


@dataclass(frozen=True)
class OptimizerPolicy:
    objective: str = "plain"        # "plain" or "rewind"
    eps: float = cost.DEFAULT_FAILURE_BUDGET
    patience: int = 5               # non-improving refinements before stopping
    max_points: int = 512
    min_step: float = 1e-6

    def __post_init__(self):
        if self.objective not in ("plain", "rewind"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.patience < 1 or self.max_points < 2 or self.min_step <= 0:
            raise ConfigError("invalid optimizer policy")


@dataclass(frozen=True)
class OptimizerStep:
    """One refinement: a midpoint inserted at the weakest fidelity link."""

    iteration: int
    n_points: int
    insert_index: int
    inserted_s: float
    weakest_fidelity: float
    cost: float
    best_cost: float
    improved: bool


@dataclass
class OptimizerTrace:
    steps: tuple[OptimizerStep, ...]
    stop_reason: str
    initial_cost: float
    final_cost: float
    evaluations: int


class ScheduleEvaluator:
    """Computes and caches spectral points of one problem instance.

    Neighboring solved points seed the Lanczos runs, which is what makes
    dense schedules cheap.  An optional persistent store (duck-typed with
    ``load(s)`` and ``save(s, point)``) is consulted before solving.
    """

    def __init__(
        self,
        lat: LatticeSpec,
        params: HubbardParams,
        sec: SectorSpec,
        spectral: SpectralConfig | None = None,
        store=None,
        max_dim: int = DEFAULT_MAX_DIM,
    ):
        self.lat = lat
        self.params = params
        self.sec = sec
        self.spectral = spectral or SpectralConfig()
        self.store = store
        self.max_dim = max_dim
        self.dim = sector_dimension(sec)
        self.solves = 0
        self._points: dict[float, SpectralPoint] = {}

    def evaluate_point(self, s: float) -> SpectralPoint:
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"s={s} outside [0, 1]")
        hit = self._points.get(s)
        if hit is not None:
            return hit
        if self.store is not None:
            stored = self.store.load(s)
            if stored is not None:
                self._points[s] = stored
                return stored
        op = build_hamiltonian(self.lat, self.params.at(s), self.sec, self.max_dim)
        point = ground_and_first_excited(
            op, self.spectral, self._hints_near(s), s=s
        )
        self.solves += 1
        self._compress_hints(point)
        self._points[s] = point
        if self.store is not None:
            self.store.save(s, point)
        return point

    def _hints_near(self, s: float) -> SpectralHints:
        if not self._points:
            return SpectralHints()
        nearest = min(self._points, key=lambda t: abs(t - s))
        p = self._points[nearest]
        return SpectralHints(psi0=p.psi0, psi1=p.psi1, psi_max=p.psi_max)

    def _compress_hints(self, point: SpectralPoint) -> None:
        if self.dim <= HINT_COMPRESS_DIM:
            return
        if point.psi1 is not None:
            point.psi1 = point.psi1.astype(np.float32)
        if point.psi_max is not None:
            point.psi_max = point.psi_max.astype(np.float32)

    def evaluate_schedule(self, svals) -> ScheduleData:
        svals = [float(s) for s in svals]
        if any(b < a for a, b in zip(svals, svals[1:])):
            raise ConfigError("schedule s values must be non-decreasing")
        solved = [self.evaluate_point(s) for s in svals]
        points = tuple(
            SchedulePoint(
                s=p.s, energy0=p.energy0, energy1=p.energy1, energy_max=p.energy_max
            )
            for p in solved
        )
        fids = tuple(
            fidelity(a.psi0, b.psi0) for a, b in zip(solved, solved[1:])
        )
        return ScheduleData(points=points, fidelities=fids)

    def spectral_point(self, s: float) -> SpectralPoint:
        """Cached full spectral point, including eigenvectors."""
        return self.evaluate_point(s)


def weakest_link(data: ScheduleData) -> int:
    """Index of the smallest fidelity; ties resolve to the earliest link."""
    fids = data.fidelities
    return int(min(range(len(fids)), key=lambda i: (fids[i], i)))


def refine_schedule(data: ScheduleData, min_step: float = 1e-6) -> list[float]:
    """Bisect the weakest link, returning the new list of s values."""
    i = weakest_link(data)
    left = data.points[i].s
    right = data.points[i + 1].s
    if right - left < 2.0 * min_step:
        raise StepFloorError(
            f"link ({left}, {right}) is narrower than twice the step floor "
            f"{min_step}"
        )
    mid = 0.5 * (left + right)
    svals = [p.s for p in data.points]
    return svals[: i + 1] + [mid] + svals[i + 1 :]


def _objective(data: ScheduleData, policy: OptimizerPolicy) -> float:
    if policy.objective == "plain":
        return cost.tts_plain(data.step_gaps, data.fidelities, policy.eps)
    return cost.tts_rewind(data.gaps, data.fidelities, method="chain")


def optimize_schedule(
    evaluator: ScheduleEvaluator,
    policy: OptimizerPolicy | None = None,
) -> tuple[ScheduleData, OptimizerTrace]:
    """Refine from the bare {0, 1} schedule until the objective stalls.

    Keeps inserting midpoints at the weakest link; stops after ``patience``
    consecutive non-improving insertions, at ``max_points``, or at the step
    floor.  Returns the best schedule seen, not necessarily the last.
    """
    policy = policy or OptimizerPolicy()
    solves_before = evaluator.solves
    data = evaluator.evaluate_schedule([0.0, 1.0])
    current_cost = _objective(data, policy)
    initial_cost = current_cost
    best_cost = current_cost
    best_data = data
    steps: list[OptimizerStep] = []
    bad = 0
    iteration = 0
    stop_reason = "max_points"
    while len(data.points) < policy.max_points:
        try:
            svals = refine_schedule(data, policy.min_step)
        except StepFloorError:
            stop_reason = "step_floor"
            break
        iteration += 1
        link = weakest_link(data)
        weak_before = float(data.fidelities[link])
        data = evaluator.evaluate_schedule(svals)
        current_cost = _objective(data, policy)
        improved = current_cost < best_cost
        if improved:
            best_cost = current_cost
            best_data = data
            bad = 0
        else:
            bad += 1
        steps.append(
            OptimizerStep(
                iteration=iteration,
                n_points=len(data.points),
                insert_index=link + 1,
                inserted_s=float(data.points[link + 1].s),
                weakest_fidelity=weak_before,
                cost=current_cost,
                best_cost=best_cost,
                improved=improved,
            )
        )
        if bad >= policy.patience:
            stop_reason = "patience"
            break
    trace = OptimizerTrace(
        steps=tuple(steps),
        stop_reason=stop_reason,
        initial_cost=initial_cost,
        final_cost=best_cost,
        evaluations=evaluator.solves - solves_before,
    )
    return best_data, trace
