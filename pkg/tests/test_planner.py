"""Permutation planning: reference instances, crossings, feasibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracdrive.planner import (
    PlanInfeasibleError,
    PlannerParams,
    default_start_positions,
    plan_permutation,
)
from diracdrive.schedule import validate


def lengths_at(schedule, t):
    _, positions = schedule.sample(t)
    edges = np.concatenate(([0.0], positions, [1.0]))
    return np.diff(edges)


def test_three_mode_reference_plan():
    plan, schedule = plan_permutation((2, 3, 1))
    assert plan.start_positions == (0.36, 0.7)
    assert plan.final_positions == (0.31, 0.68)
    assert plan.n_transition_sites == 2
    sites = [(e.dirac, round(e.position, 10)) for e in plan.events]
    assert (1, 0.35) in sites and (2, 0.69) in sites
    assert plan.pairing == ((1, 2), (2, 3), (3, 1))
    assert validate(schedule) == []
    eta0, _ = schedule.sample(0.0)
    eta_end, pos_end = schedule.sample(schedule.t_end)
    assert eta0 == 0.0 and eta_end == 0.0
    assert tuple(pos_end) == plan.final_positions


def test_four_mode_reference_plan():
    plan, schedule = plan_permutation((2, 4, 3, 1))
    assert plan.start_positions == (0.27, 0.53, 0.77)
    assert plan.final_positions == (0.26, 0.49, 0.73)
    assert plan.move_order == ((1, 0.26), (2, 0.50), (3, 0.73), (2, 0.49))
    assert plan.n_transition_sites == 8
    site_positions = sorted({round(e.position, 10) for e in plan.events})
    assert site_positions == [0.265, 0.495, 0.51, 0.515, 0.52, 0.74, 0.75, 0.76]
    assert plan.pairing == ((1, 4), (2, 1), (3, 3), (4, 2))
    assert validate(schedule) == []


def test_identity_permutation_holds_still():
    for m in (2, 3, 4):
        sigma = tuple(range(1, m + 1))
        plan, schedule = plan_permutation(sigma)
        assert plan.final_positions == plan.start_positions
        assert plan.n_transition_sites == 0
        kinds = [s.kind for s in schedule.segments]
        assert kinds == ["eta_ramp_up", "hold", "eta_ramp_down"]


def test_two_mode_swap_crosses_center():
    plan, schedule = plan_permutation((2, 1), PlannerParams(total_time=600.0))
    assert plan.n_transition_sites == 1
    assert plan.events[0].position == pytest.approx(0.5, abs=1e-12)
    assert plan.events[0].intervals == (0, 1)
    assert validate(schedule) == []


def test_two_mode_swap_infeasible_at_default_horizon():
    with pytest.raises(PlanInfeasibleError) as err:
        plan_permutation((2, 1))
    assert err.value.required_time is not None
    assert err.value.required_time > 200.0


def test_sigma_validation():
    with pytest.raises(ValueError):
        plan_permutation((1,))
    with pytest.raises(ValueError):
        plan_permutation((1, 3))
    with pytest.raises(ValueError):
        plan_permutation((2, 2, 1))


def test_position_constraints():
    with pytest.raises(ValueError, match="decreasing"):
        plan_permutation((2, 3, 1), PlannerParams(start_positions=(0.3, 0.6)))
    with pytest.raises(ValueError, match="margin|within"):
        plan_permutation((2, 3, 1), PlannerParams(start_positions=(0.02, 0.6)))


def test_crossing_sites_are_exact_length_ties():
    for sigma, params in (((2, 3, 1), None), ((2, 4, 3, 1), None)):
        plan, schedule = plan_permutation(sigma, params)
        for event in plan.events:
            lengths = lengths_at(schedule, event.time)
            p, q = event.intervals
            assert abs(lengths[p] - lengths[q]) <= 1e-12


def test_length_order_constant_between_transitions():
    _, schedule = plan_permutation((2, 3, 1))
    for segment in schedule.segments:
        if segment.kind != "adiabatic_move":
            continue
        ts = np.linspace(segment.t_begin, segment.t_end, 500)
        ts[-1] = segment.t_end
        patterns = set()
        for t in ts:
            lengths = lengths_at(schedule, min(t, schedule.t_end))
            diffs = lengths[:, None] - lengths[None, :]
            patterns.add(tuple(np.sign(diffs[np.triu_indices_from(diffs, 1)]).astype(int)))
        assert len(patterns) == 1
    assert sum(s.kind == "transition_move" for s in schedule.segments) == 2


def test_schedule_strength_continuity_dense_audit():
    _, schedule = plan_permutation((2, 3, 1))
    rng = np.random.default_rng(0)
    times = rng.uniform(0.0, schedule.t_end, size=100_000)
    etas, positions = schedule.sample_many(times)
    assert np.all(etas >= 0.0)
    assert np.all(np.diff(positions, axis=1) > 0.0)
    # continuity across every internal boundary
    for left, right in zip(schedule.segments, schedule.segments[1:]):
        t = left.t_end
        assert abs(left.eta_at(t) - right.eta_at(t)) <= 1e-14 * 2000.0
        gap = np.abs(np.asarray(left.positions_at(t)) - np.asarray(right.positions_at(t)))
        assert np.max(gap) <= 1e-14


def test_default_start_positions_generic():
    for m in (2, 5, 6):
        positions = default_start_positions(m)
        lengths = np.diff(np.concatenate(([0.0], positions, [1.0])))
        assert np.all(np.diff(lengths) < 0.0)
        assert lengths[-1] > lengths[0] / 2.0
        assert positions[0] >= 0.05 and positions[-1] <= 0.95


@given(st.permutations(list(range(1, 6))))
@settings(max_examples=12, deadline=None)
def test_generic_five_mode_plans(sigma):
    sigma = tuple(sigma)
    plan, schedule = plan_permutation(sigma, PlannerParams(total_time=1200.0))
    # source convention: final mode r carries the initial energy of mode sigma(r)
    assert plan.pairing == tuple((r, sigma[r - 1]) for r in range(1, 6))
    assert validate(schedule) == []
    for event in plan.events:
        lengths = lengths_at(schedule, event.time)
        p, q = event.intervals
        assert abs(lengths[p] - lengths[q]) <= 1e-12


def test_min_feasible_time_reported():
    plan, _ = plan_permutation((2, 3, 1))
    assert plan.min_feasible_time < 200.0
    assert plan.max_drift_slope == pytest.approx(5.6e-4, rel=0.05)
