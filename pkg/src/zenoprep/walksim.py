"""Monte Carlo validation of the cost models.

Three levels of realism: the four-node rewind walk with prescribed
transition probabilities, full protocol sequences over a gap/fidelity
profile, and exact projective measurements on the quantum state of a tiny
instance (optionally in the enlarged walk space).

All randomness is counter-based: round r of a simulation draws from a
generator keyed by (seed, r), one lane per trial, so results do not depend
on scheduling or batching of trials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError, ConvergenceError
from .model import (
    HubbardParams,
    LatticeSpec,
    SectorSpec,
    build_hamiltonian,
    sector_dimension,
)
from .pauli import jordan_wigner, pauli_decompose
from .qubitization import (
    QubitizationSettings,
    build_walk_operator,
    qubitized_gap,
    reversed_hamiltonian,
    walk_eigenspace_pair,
)
from .schedule import ScheduleData
from .spectral import normalize_to_window

EXACT_SIM_THRESHOLD = 1024
QUBITIZED_SITE_LIMIT = 4


@dataclass(frozen=True)
class WalkProfile:
    """Per-step fidelities and gaps of a preparation sequence.

    ``gaps`` has one leading entry for the initial Hamiltonian, so its
    length exceeds ``fidelities`` by one.
    """

    fidelities: tuple[float, ...]
    gaps: tuple[float, ...]
    protocol: str = "rewind"

    def __post_init__(self):
        if len(self.gaps) != len(self.fidelities) + 1:
            raise ConfigError(
                f"need one more gap than fidelity, got {len(self.gaps)} "
                f"and {len(self.fidelities)}"
            )
        if any(g <= 0 for g in self.gaps):
            raise ConfigError("gaps must be positive")
        if any(not 0.0 < f <= 1.0 for f in self.fidelities):
            raise ConfigError("fidelities must lie in (0, 1]")
        if self.protocol not in ("rewind", "restart"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")

    @property
    def n_steps(self) -> int:
        return len(self.fidelities)


@dataclass(frozen=True)
class McResult:
    mean_cost: float
    std_error: float
    trials: int
    seed: int
    histogram: tuple[tuple[str, float], ...] | None = None

    def stat(self, name: str, default: float | None = None) -> float | None:
        for key, value in self.histogram or ():
            if key == name:
                return value
        return default


def _uniforms(seed: int, round_index: int, n: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed, counter=[0, round_index, 0, 0])
    return np.random.Generator(bitgen).random(n)


def _summarize(costs: np.ndarray, extra: list[tuple[str, float]]) -> tuple:
    qs = np.quantile(costs, [0.0, 0.5, 0.9, 1.0])
    base = [
        ("min", float(qs[0])),
        ("median", float(qs[1])),
        ("p90", float(qs[2])),
        ("max", float(qs[3])),
    ]
    return tuple(base + extra)


def _finish(costs: np.ndarray, trials: int, seed: int, extra=()) -> McResult:
    mean = float(costs.mean())
    std = float(costs.std(ddof=1)) if trials > 1 else 0.0
    return McResult(
        mean_cost=mean,
        std_error=std / np.sqrt(trials),
        trials=trials,
        seed=seed,
        histogram=_summarize(costs, list(extra)),
    )


def simulate_rewind_step(
    fid: float,
    gap_prev: float,
    gap: float,
    trials: int = 100_000,
    seed: int = 0,
    max_rounds: int = 1_000_000,
) -> McResult:
    """Sample the four-node rewind walk for one step.

    Nodes: 0 at the previous ground state measuring the new projector,
    1 at the failed new state measuring the previous projector, 2 at the
    failed previous state measuring the new projector; success absorbs.
    """
    if not 0.0 < fid <= 1.0:
        raise ConfigError(f"fidelity must lie in (0, 1], got {fid}")
    if gap <= 0 or gap_prev <= 0:
        raise ConfigError("gaps must be positive")
    if trials < 1:
        raise ConfigError("need at least one trial")
    state = np.zeros(trials, dtype=np.int8)
    alive = np.ones(trials, dtype=bool)
    costs = np.zeros(trials)
    cost_here = np.array([1.0 / gap, 1.0 / gap_prev, 1.0 / gap])
    for r in range(max_rounds):
        if not alive.any():
            break
        u = _uniforms(seed, r, trials)
        st = state[alive]
        costs[alive] += cost_here[st]
        ua = u[alive]
        nxt = st.copy()
        win = ua < fid
        # node 0: success absorbs, failure moves to the failed new state
        nxt[(st == 0) & win] = -1
        nxt[(st == 0) & ~win] = 1
        # node 1: hitting the previous ground state goes back to node 0,
        # its complement to node 2 (transition probability fid to node 2)
        nxt[(st == 1) & win] = 2
        nxt[(st == 1) & ~win] = 0
        # node 2: the new projector succeeds with probability 1 - fid here
        nxt[(st == 2) & ~win] = -1
        nxt[(st == 2) & win] = 1
        state[alive] = np.where(nxt == -1, 0, nxt)
        keep = nxt != -1
        idx = np.nonzero(alive)[0]
        alive[idx[~keep]] = False
    censored = int(alive.sum())
    return _finish(costs, trials, seed, extra=[("censored", float(censored))])


def simulate_sequence(
    profile: WalkProfile,
    trials: int = 10_000,
    seed: int = 0,
    max_rounds: int = 1_000_000,
) -> McResult:
    """Total preparation cost under the restart or rewind protocol."""
    if trials < 1:
        raise ConfigError("need at least one trial")
    fids = np.asarray(profile.fidelities)
    gaps = np.asarray(profile.gaps)
    L = profile.n_steps
    costs = np.zeros(trials)
    if profile.protocol == "restart":
        step = np.ones(trials, dtype=np.int64)     # 1-based step index
        alive = np.ones(trials, dtype=bool)
        attempts = trials
        for r in range(max_rounds):
            if not alive.any():
                break
            u = _uniforms(seed, r, trials)
            j = step[alive]
            costs[alive] += 1.0 / gaps[j]
            ok = u[alive] < fids[j - 1]
            nxt = np.where(ok, j + 1, 1)
            attempts += int(np.count_nonzero(~ok & (j >= 1)))
            step[alive] = nxt
            finished = nxt > L
            idx = np.nonzero(alive)[0]
            alive[idx[finished]] = False
        # every failure starts one more attempt
        extra = [
            ("mean_attempts", attempts / trials),
            ("success_frequency", trials / attempts),
            ("censored", float(alive.sum())),
        ]
        return _finish(costs, trials, seed, extra=extra)

    # Rewind: per-trial position is (step j, walk node); encode 3j + node.
    code = np.full(trials, 3, dtype=np.int64)      # step 1, node 0
    alive = np.ones(trials, dtype=bool)
    first_try_rewinds = 0
    for r in range(max_rounds):
        if not alive.any():
            break
        u = _uniforms(seed, r, trials)
        c = code[alive]
        j = c // 3
        node = c % 3
        gap_here = np.where(node == 1, gaps[j - 1], gaps[j])
        costs[alive] += 1.0 / gap_here
        win = u[alive] < fids[j - 1]
        absorb = ((node == 0) & win) | ((node == 2) & ~win)
        nxt_node = np.select(
            [node == 0, (node == 1) & win, (node == 1) & ~win, node == 2],
            [1, 2, 0, 1],
        )
        first_try_rewinds += int(np.count_nonzero((node == 0) & ~win))
        j_next = np.where(absorb, j + 1, j)
        node_next = np.where(absorb, 0, nxt_node)
        nxt_code = 3 * j_next + node_next
        code[alive] = nxt_code
        done = j_next > L
        idx = np.nonzero(alive)[0]
        alive[idx[done]] = False
    extra = [
        ("mean_first_try_failures", first_try_rewinds / trials),
        ("censored", float(alive.sum())),
    ]
    return _finish(costs, trials, seed, extra=extra)


@dataclass(frozen=True)
class ProjectiveStats:
    """Outcome statistics of exact projective simulation."""

    mean_cost: float
    std_error: float
    trials: int
    seed: int
    protocol: str
    qubitized: bool
    first_step_frequency: float
    expected_first_step: float
    step_frequencies: tuple[float, ...]
    expected_step_probabilities: tuple[float, ...]
    final_fidelity_min: float
    max_leakage: float


def _sector_eigenstates(lat, params, sec, svals):
    """Dense ground states along the path, consecutive signs aligned."""
    states = []
    energies = []
    prev = None
    for s in svals:
        h = build_hamiltonian(lat, params.at(s), sec).to_dense()
        vals, vecs = np.linalg.eigh(h)
        psi = vecs[:, 0]
        if prev is not None and float(prev @ psi) < 0:
            psi = -psi
        states.append(psi)
        energies.append(vals)
        prev = psi
    return states, energies


def simulate_exact_projective(
    lat: LatticeSpec,
    params: HubbardParams,
    sec: SectorSpec,
    data: ScheduleData,
    trials: int = 10_000,
    seed: int = 0,
    protocol: str = "rewind",
    qubitized: bool = False,
    settings: QubitizationSettings | None = None,
    exact_sim_threshold: int = EXACT_SIM_THRESHOLD,
    max_rounds: int = 100_000,
) -> ProjectiveStats:
    """Replay the preparation with true Born-rule projective measurements.

    In sector mode the measured projectors are the rank-1 ground-state
    projectors; in qubitized mode they are the rank-2 walk eigenspace
    projectors in the ancilla-extended register built from the full-space
    Pauli form of the Hamiltonian.
    """
    if protocol not in ("rewind", "restart"):
        raise ConfigError(f"unknown protocol {protocol!r}")
    if trials < 1:
        raise ConfigError("need at least one trial")
    dim = sector_dimension(sec)
    if dim > exact_sim_threshold:
        raise CapacityError(
            f"sector dimension {dim} exceeds the exact simulation "
            f"threshold {exact_sim_threshold}"
        )
    if qubitized and lat.n_sites > QUBITIZED_SITE_LIMIT:
        raise CapacityError(
            f"qubitized projective simulation limited to "
            f"{QUBITIZED_SITE_LIMIT} sites, got {lat.n_sites}"
        )
    svals = [p.s for p in data.points]
    L = len(svals) - 1
    if qubitized:
        basis_pairs, gaps, start = _qubitized_measurement_basis(
            lat, params, sec, data, settings or QubitizationSettings()
        )
        vectors = [np.stack(pair) for pair in basis_pairs]   # (2, dim)
    else:
        states, energies = _sector_eigenstates(lat, params, sec, svals)
        gaps = [float(e[1] - e[0]) for e in energies]
        vectors = [psi[None, :] for psi in states]           # (1, dim)
        start = states[0]

    # Orthonormal basis of span(ground_{j-1}, ground_j) per step, used to
    # quantify leakage out of the two-level picture.
    span_bases = []
    for j in range(1, L + 1):
        stacked = np.vstack([vectors[j - 1], vectors[j]])
        # A degenerate walk eigenspace contributes a zero row; drop it so
        # the QR factor spans exactly the measured subspaces.
        stacked = stacked[np.linalg.norm(stacked, axis=1) > 1e-12]
        q, _ = np.linalg.qr(stacked.T)
        span_bases.append(q.T)

    state = np.tile(start, (trials, 1))
    costs = np.zeros(trials)
    pos = np.full(trials, 3, dtype=np.int64)   # step 1, node 0
    alive = np.ones(trials, dtype=bool)
    succ_counts = np.zeros(L + 1)
    meas_counts = np.zeros(L + 1)
    max_leakage = 0.0

    r = 0
    while alive.any():
        if r >= max_rounds:
            raise ConvergenceError(
                f"projective simulation did not absorb within {max_rounds} rounds"
            )
        u = _uniforms(seed, r, trials)
        r += 1
        snapshot = pos.copy()
        for j in range(1, L + 1):
            for node in (0, 1, 2):
                mask = alive & (snapshot == 3 * j + node)
                if not mask.any():
                    continue
                target = j if node != 1 else j - 1
                vs = vectors[target]
                rows = state[mask]
                amps = rows @ vs.T                 # (n, rank)
                p = np.clip(np.sum(amps**2, axis=1), 0.0, 1.0)
                costs[mask] += 1.0 / gaps[target]
                hit = u[mask] < p
                in_span = np.sum((rows @ span_bases[j - 1].T) ** 2, axis=1)
                leak = float(np.max(1.0 - in_span)) if in_span.size else 0.0
                max_leakage = max(max_leakage, leak)
                collapsed = amps @ vs
                rest = rows - collapsed
                norm_in = np.linalg.norm(collapsed, axis=1, keepdims=True)
                norm_out = np.linalg.norm(rest, axis=1, keepdims=True)
                new_rows = np.where(
                    hit[:, None],
                    collapsed / np.maximum(norm_in, 1e-300),
                    rest / np.maximum(norm_out, 1e-300),
                )
                state[mask] = new_rows
                if node == 0:
                    meas_counts[j] += mask.sum()
                    succ_counts[j] += hit.sum()
                idx = np.nonzero(mask)[0]
                if node == 1:
                    # Hitting the previous ground state returns to node 0;
                    # its complement continues to node 2.
                    pos[idx] = np.where(hit, 3 * j + 0, 3 * j + 2)
                elif protocol == "rewind":
                    # Nodes 0 and 2 both measure the step-j projector; any
                    # outcome inside it is a success.  The Born probability
                    # itself carries the F vs 1-F asymmetry of the walk.
                    pos[idx] = np.where(hit, 3 * (j + 1), 3 * j + 1)
                else:
                    pos[idx] = np.where(hit, 3 * (j + 1), 3)
                    restart = idx[~hit]
                    state[restart] = start
                finished = pos[idx] >= 3 * (L + 1)
                alive[idx[finished]] = False

    final_target = vectors[L]
    famps = final_target @ state.T
    final_fids = np.sum(famps**2, axis=0)
    exp_steps = tuple(float(f) for f in data.fidelities)
    freq = tuple(
        float(succ_counts[j] / meas_counts[j]) if meas_counts[j] else float("nan")
        for j in range(1, L + 1)
    )
    mean = float(costs.mean())
    std = float(costs.std(ddof=1)) if trials > 1 else 0.0
    return ProjectiveStats(
        mean_cost=mean,
        std_error=std / np.sqrt(trials),
        trials=trials,
        seed=seed,
        protocol=protocol,
        qubitized=qubitized,
        first_step_frequency=freq[0],
        expected_first_step=exp_steps[0],
        step_frequencies=freq,
        expected_step_probabilities=exp_steps,
        final_fidelity_min=float(final_fids.min()),
        max_leakage=max_leakage,
    )


def _qubitized_measurement_basis(
    lat: LatticeSpec,
    params: HubbardParams,
    sec: SectorSpec,
    data: ScheduleData,
    settings: QubitizationSettings,
):
    """Rank-2 walk eigenspace bases per schedule point on the full-space
    register, plus walk gaps and the encoded initial state."""
    from .model import sector_embedding

    svals = [p.s for p in data.points]
    states, energies = _sector_eigenstates(lat, params, sec, svals)
    emb = sector_embedding(sec)
    full_dim = 4**lat.n_sites

    h_bars = []
    e_bars = []
    walk_gaps = []
    for s, psi, vals in zip(svals, states, energies):
        wmap = normalize_to_window(vals[0], vals[-1], settings.window_delta)
        ps = jordan_wigner(lat, params.at(s))
        h_win = ps.scaled(wmap.scale).shifted(wmap.shift)
        h_bars.append(reversed_hamiltonian(h_win, settings.norm))
        e_bars.append(1.0 - wmap.energy(vals[0]) / settings.norm)
        walk_gaps.append(qubitized_gap(wmap.gap(vals[1] - vals[0]), settings.norm))

    union = tuple(sorted(set(s for hb in h_bars for s, _ in hb.terms)))
    pairs = []
    start = None
    for i, (hb, psi, eb) in enumerate(zip(h_bars, states, e_bars)):
        walk = build_walk_operator(hb, union)
        full_psi = np.zeros(full_dim)
        full_psi[emb] = psi
        u, u_perp = walk_eigenspace_pair(walk, full_psi, eb)
        pairs.append((u, u_perp))
        if i == 0:
            start = u.copy()
    return pairs, walk_gaps, start
