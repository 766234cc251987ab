"""Request and response models for the service and the CLI.

Every model forbids unknown fields, so a typo in a config file or a
request body fails loudly instead of being silently dropped.  The
``RunConfigModel`` mirrors the core run configuration field for field;
semantic validation (coupling signs, range checks, lattice geometry)
stays in the core package and surfaces through the error mapping.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from .. import __version__
from ..pipeline import SCHEMA_VERSION, COST_MODELS, RunConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeModel(StrictModel):
    m: int
    k: int = 1


class RunConfigModel(StrictModel):
    """Field-for-field mirror of the core run configuration."""

    schema_version: int = SCHEMA_VERSION
    m: int
    k: int = 1
    u: float | None = None
    doping: float = 0.0
    t_hop: float = 1.0
    epsilon: float = 0.01
    cost_models: list[str] = Field(default_factory=lambda: list(COST_MODELS))
    objective: str | None = None
    patience: int = 5
    max_points: int = 512
    min_step: float = 1e-6
    tol: float = 1e-9
    max_matvecs: int = 40_000
    dense_threshold: int = 600
    degeneracy_tol: float = 1e-8
    seed: int = 1905
    window_delta: float = 0.1
    norm: float | None = None
    mode: str = "gapmap"
    mc_trials: int = 0
    mc_seed: int = 7
    cache_dir: str | None = None
    max_dim: int = 2_000_000
    output: str | None = None

    def to_config(self) -> RunConfig:
        data = self.model_dump()
        data.pop("schema_version")
        if data.get("norm") is None:
            data.pop("norm")
        data["cost_models"] = tuple(data["cost_models"])
        return RunConfig(**data)


class SpectrumRequest(StrictModel):
    config: RunConfigModel
    s: float


class SpectrumResponse(StrictModel):
    s: float
    energy0: float
    energy1: float
    energy_max: float
    gap: float
    residual: float
    matvecs: int
    dimension: int


class ScheduleRequest(StrictModel):
    config: RunConfigModel
    objective: str | None = None


class ScheduleResponse(StrictModel):
    objective: str
    schedule: dict
    optimizer: dict


class CostRequest(StrictModel):
    """Price an explicit schedule: ``gaps`` has one more entry than
    ``fidelities`` (the leading entry is the initial-Hamiltonian gap)."""

    gaps: list[float]
    fidelities: list[float]
    epsilon: float = 0.01
    units: str = "natural"


class CostResponse(StrictModel):
    cost: dict


class SimulateRequest(StrictModel):
    """Monte Carlo validation; either give a profile directly or let the
    optimizer produce one from the config."""

    config: RunConfigModel
    protocol: str = "rewind"
    trials: int | None = None
    seed: int | None = None
    exact: bool = False
    qubitized: bool = False
    gaps: list[float] | None = None
    fidelities: list[float] | None = None


class SimulateResponse(StrictModel):
    protocol: str
    trials: int
    seed: int
    mean_cost: float
    std_error: float
    analytic: float | None = None
    z_score: float | None = None
    details: dict = Field(default_factory=dict)


class TdepthRequest(StrictModel):
    model: str = "pf"
    t_total: float | None = None
    walk_operations: float | None = None
    gap_min: float | None = None
    n_sites: int = 100
    n_qubits: int | None = None


class TdepthResponse(StrictModel):
    t_depth: float
    model: str
    out_of_model: bool
    per_operation_depth: float | None = None
    synthesis_accuracy: float | None = None
    notes: str = ""


class RunRequest(StrictModel):
    config: RunConfigModel


class RunResponse(StrictModel):
    report: dict


class ScanRequest(StrictModel):
    config: RunConfigModel
    lattices: list[LatticeModel]


class ScanResponse(StrictModel):
    reports: list[dict]
    fits: dict


class PlotDataRequest(StrictModel):
    """Render plot CSVs from previously produced report payloads."""

    reports: list[dict]
    fits: dict = Field(default_factory=dict)
    models: list[str] | None = None


class PlotDataResponse(StrictModel):
    files: dict[str, str]


class HealthResponse(StrictModel):
    status: str
    version: str
    schema_version: int


def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__, schema_version=SCHEMA_VERSION)
