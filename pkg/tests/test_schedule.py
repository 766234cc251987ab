"""Tests for schedule evaluation and the weakest-link optimizer."""

import numpy as np
import pytest

from zenoprep.cost import tts_plain, tts_rewind
from zenoprep.errors import ConfigError, StepFloorError
from zenoprep.model import (
    HubbardParams,
    build_lattice,
    default_coupling,
    doped_sector,
)
from zenoprep.schedule import (
    OptimizerPolicy,
    ScheduleData,
    ScheduleEvaluator,
    SchedulePoint,
    optimize_schedule,
    refine_schedule,
    weakest_link,
)
from zenoprep.spectral import SpectralConfig, fidelity


def make_evaluator(m, k=1, doping=0.0):
    lat = build_lattice(m, k)
    params = HubbardParams(u=default_coupling(lat))
    sec = doped_sector(lat, doping)
    return ScheduleEvaluator(lat, params, sec, SpectralConfig())


def make_point(s, gap, e0=0.0):
    return SchedulePoint(s=s, energy0=e0, energy1=e0 + gap, energy_max=e0 + gap + 1.0)


def make_data(svals, gaps, fids):
    points = tuple(make_point(s, g) for s, g in zip(svals, gaps))
    return ScheduleData(points=points, fidelities=tuple(fids))


class TestScheduleData:
    def test_properties(self):
        data = make_data([0.0, 0.5, 1.0], [1.0, 0.4, 0.8], [0.9, 0.8])
        np.testing.assert_allclose(data.svals, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(data.gaps, [1.0, 0.4, 0.8])
        np.testing.assert_allclose(data.step_gaps, [0.4, 0.8])
        assert data.min_gap == 0.4
        assert data.n_steps == 2
        assert data.success_probability() == pytest.approx(0.72, rel=1e-14)

    def test_point_accessors(self):
        p = make_point(0.3, 0.5, e0=-1.0)
        assert p.gap == 0.5
        assert p.spread == 1.5

    def test_needs_two_points(self):
        with pytest.raises(ConfigError):
            ScheduleData(points=(make_point(0.0, 1.0),), fidelities=())

    def test_endpoint_pinning(self):
        with pytest.raises(ConfigError):
            make_data([0.1, 1.0], [1.0, 1.0], [0.9])
        with pytest.raises(ConfigError):
            make_data([0.0, 0.9], [1.0, 1.0], [0.9])

    def test_ordering(self):
        with pytest.raises(ConfigError):
            make_data([0.0, 0.7, 0.3, 1.0], [1.0] * 4, [0.9] * 3)

    def test_fidelity_count(self):
        with pytest.raises(ConfigError):
            make_data([0.0, 1.0], [1.0, 1.0], [0.9, 0.9])

    def test_fidelity_range(self):
        with pytest.raises(ConfigError):
            make_data([0.0, 1.0], [1.0, 1.0], [1.5])
        with pytest.raises(ConfigError):
            make_data([0.0, 1.0], [1.0, 1.0], [-0.1])


class TestWeakestLink:
    def test_minimum(self):
        data = make_data([0.0, 0.4, 1.0], [1.0] * 3, [0.9, 0.3])
        assert weakest_link(data) == 1

    def test_tie_takes_earliest(self):
        data = make_data([0.0, 0.2, 0.6, 1.0], [1.0] * 4, [0.5, 0.3, 0.3])
        assert weakest_link(data) == 1
        data = make_data([0.0, 0.5, 1.0], [1.0] * 3, [0.3, 0.3])
        assert weakest_link(data) == 0


class TestRefineSchedule:
    def test_bisects_weakest(self):
        data = make_data([0.0, 0.5, 1.0], [1.0] * 3, [0.9, 0.2])
        assert refine_schedule(data) == [0.0, 0.5, 0.75, 1.0]

    def test_bisects_first_link(self):
        data = make_data([0.0, 1.0], [1.0, 1.0], [0.5])
        assert refine_schedule(data) == [0.0, 0.5, 1.0]

    def test_step_floor(self):
        data = make_data([0.0, 1.0], [1.0, 1.0], [0.5])
        with pytest.raises(StepFloorError):
            refine_schedule(data, min_step=0.6)


class TestEvaluator:
    def test_point_memoization(self):
        ev = make_evaluator(2)
        a = ev.evaluate_point(0.5)
        b = ev.evaluate_point(0.5)
        assert ev.solves == 1
        assert a is b

    def test_schedule_memoization(self):
        ev = make_evaluator(2)
        first = ev.evaluate_schedule([0.0, 0.5, 1.0])
        assert ev.solves == 3
        second = ev.evaluate_schedule([0.0, 0.5, 1.0])
        assert ev.solves == 3
        assert first == second

    def test_fidelities_from_ground_states(self):
        ev = make_evaluator(3)
        data = ev.evaluate_schedule([0.0, 1.0])
        a = ev.spectral_point(0.0)
        b = ev.spectral_point(1.0)
        assert data.fidelities[0] == pytest.approx(
            fidelity(a.psi0, b.psi0), abs=1e-14
        )

    def test_range_validation(self):
        ev = make_evaluator(2)
        with pytest.raises(ConfigError):
            ev.evaluate_point(1.2)
        with pytest.raises(ConfigError):
            ev.evaluate_schedule([0.0, 0.7, 0.3, 1.0])


class TestOptimizerPolicy:
    def test_validation(self):
        with pytest.raises(ConfigError):
            OptimizerPolicy(objective="fastest")
        with pytest.raises(ConfigError):
            OptimizerPolicy(patience=0)
        with pytest.raises(ConfigError):
            OptimizerPolicy(max_points=1)
        with pytest.raises(ConfigError):
            OptimizerPolicy(min_step=0.0)


class TestOptimizeSchedule:
    def test_improves_plain_objective(self):
        ev = make_evaluator(4)
        data, trace = optimize_schedule(ev, OptimizerPolicy(objective="plain"))
        assert trace.final_cost <= trace.initial_cost
        assert trace.final_cost == pytest.approx(
            tts_plain(data.step_gaps, data.fidelities), rel=1e-12
        )
        assert len(trace.steps) > 0
        assert trace.evaluations == ev.solves

    def test_improves_rewind_objective(self):
        ev = make_evaluator(4)
        data, trace = optimize_schedule(ev, OptimizerPolicy(objective="rewind"))
        assert trace.final_cost <= trace.initial_cost
        assert trace.final_cost == pytest.approx(
            tts_rewind(data.gaps, data.fidelities), rel=1e-12
        )

    def test_insertions_replay_weakest_link(self):
        # Every recorded insertion must bisect the weakest link of the
        # schedule as it stood at that iteration.
        ev = make_evaluator(4)
        _, trace = optimize_schedule(ev, OptimizerPolicy(objective="plain"))
        replay = make_evaluator(4)
        svals = [0.0, 1.0]
        for step in trace.steps:
            data = replay.evaluate_schedule(svals)
            link = weakest_link(data)
            assert step.insert_index == link + 1
            assert step.weakest_fidelity == pytest.approx(
                float(data.fidelities[link]), abs=1e-12
            )
            mid = 0.5 * (svals[link] + svals[link + 1])
            assert step.inserted_s == pytest.approx(mid, abs=1e-15)
            svals.insert(link + 1, mid)

    def test_step_bookkeeping(self):
        ev = make_evaluator(4)
        _, trace = optimize_schedule(ev)
        for i, step in enumerate(trace.steps):
            assert step.iteration == i + 1
            assert step.n_points == 3 + i
        best = min([trace.initial_cost] + [s.cost for s in trace.steps])
        assert trace.final_cost == pytest.approx(best, rel=1e-14)

    def test_stop_on_max_points(self):
        ev = make_evaluator(4)
        data, trace = optimize_schedule(
            ev, OptimizerPolicy(max_points=3, patience=50)
        )
        assert trace.stop_reason == "max_points"
        assert len(data.points) <= 3

    def test_stop_on_step_floor(self):
        ev = make_evaluator(4)
        _, trace = optimize_schedule(
            ev, OptimizerPolicy(min_step=0.5, patience=50)
        )
        assert trace.stop_reason == "step_floor"
        assert len(trace.steps) == 1

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            ev = make_evaluator(4)
            data, trace = optimize_schedule(ev)
            runs.append((tuple(data.svals), tuple(data.fidelities), trace.final_cost))
        assert runs[0] == runs[1]
