"""Schedule segments, sampling, validation, JSON round trips."""

import math

import pytest

from diracdrive.schedule import (
    ControlSchedule,
    EtaProfile,
    PositionProfile,
    ScheduleSegment,
    SlopeCaps,
    eta_ramp,
    hold_segment,
    load_schedule,
    move_segment,
    ramp_segment,
    save_schedule,
    schedule_from_dict,
    schedule_to_dict,
    validate,
)


def test_eta_ramp_endpoints_and_midpoint():
    assert eta_ramp(0.0, 50.0, 2000.0, "up") == 0.0
    assert eta_ramp(50.0, 50.0, 2000.0, "up") == 2000.0
    assert eta_ramp(25.0, 50.0, 2000.0, "up") == pytest.approx(1000.0, rel=1e-14)
    assert eta_ramp(0.0, 50.0, 2000.0, "down") == 2000.0
    assert eta_ramp(50.0, 50.0, 2000.0, "down") == 0.0


def test_eta_ramp_flat_ends():
    # derivative (pi eta / 2T) sin(pi t / T) vanishes at both ends
    h = 1e-6
    for direction in ("up", "down"):
        start_slope = (eta_ramp(h, 1.0, 5.0, direction) - eta_ramp(0.0, 1.0, 5.0, direction)) / h
        end_slope = (eta_ramp(1.0, 1.0, 5.0, direction) - eta_ramp(1.0 - h, 1.0, 5.0, direction)) / h
        assert abs(start_slope) < 1e-4
        assert abs(end_slope) < 1e-4


def test_eta_ramp_domain_errors():
    with pytest.raises(ValueError):
        eta_ramp(-0.1, 1.0, 5.0)
    with pytest.raises(ValueError):
        eta_ramp(1.1, 1.0, 5.0)
    with pytest.raises(ValueError):
        eta_ramp(0.5, 1.0, -5.0)
    with pytest.raises(ValueError):
        eta_ramp(0.5, 1.0, 5.0, "sideways")


def test_profile_values():
    eta = EtaProfile.cosine(0.0, 10.0)
    assert eta.value(0.0) == 0.0
    assert eta.value(1.0) == 10.0
    assert eta.value(0.5) == pytest.approx(5.0, rel=1e-14)
    pos = PositionProfile.linear(0.2, 0.4)
    assert pos.value(0.5) == pytest.approx(0.3, rel=1e-14)
    smooth = PositionProfile.cosine(0.2, 0.4)
    assert smooth.value(0.0) == 0.2
    assert smooth.value(1.0) == pytest.approx(0.4, rel=1e-14)
    assert smooth.peak_slope_factor() == pytest.approx(math.pi / 2.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        EtaProfile("const", 1.0, 2.0)
    with pytest.raises(ValueError):
        PositionProfile("const", 0.2, 0.3)
    with pytest.raises(ValueError):
        PositionProfile("spline", 0.2, 0.3)


def test_segment_ordering_and_kinds():
    with pytest.raises(ValueError):
        hold_segment(1.0, 1.0, 5.0, (0.5,))
    with pytest.raises(ValueError):
        ScheduleSegment("wiggle", 0.0, 1.0, EtaProfile.const(1.0), ())
    with pytest.raises(ValueError):
        move_segment(0.0, 1.0, 5.0, (0.3,), (0.4,), kind="teleport")


def test_schedule_requires_contiguous_tiling():
    seg1 = hold_segment(0.0, 1.0, 5.0, (0.5,))
    seg2 = hold_segment(1.5, 2.0, 5.0, (0.5,))
    with pytest.raises(ValueError, match="tile"):
        ControlSchedule((seg1, seg2), 1)


def test_schedule_requires_consistent_width():
    seg = hold_segment(0.0, 1.0, 5.0, (0.3, 0.7))
    with pytest.raises(ValueError):
        ControlSchedule((seg,), 1)


def test_sample_boundary_belongs_to_later_segment():
    schedule = ControlSchedule(
        (
            hold_segment(0.0, 1.0, 1.0, (0.5,)),
            move_segment(1.0, 2.0, 1.0, (0.5,), (0.6,)),
        ),
        1,
    )
    eta, pos = schedule.sample(1.0)
    assert pos[0] == 0.5  # linear segment starts at 0.5
    assert schedule.segment_index(1.0) == 1
    assert schedule.segment_index(2.0) == 1


def test_sample_outside_raises():
    schedule = ControlSchedule((hold_segment(0.0, 1.0, 1.0, ()),), 0)
    with pytest.raises(ValueError):
        schedule.sample(1.5)


def test_boundary_continuity_of_builders():
    schedule = ControlSchedule(
        (
            ramp_segment(0.0, 1.0, 0.0, 7.0, (0.4,)),
            move_segment(1.0, 2.0, 7.0, (0.4,), (0.45,)),
            ramp_segment(2.0, 3.0, 7.0, 0.0, (0.45,)),
        ),
        1,
    )
    for t in (1.0, 2.0):
        left = schedule.segments[schedule.segment_index(t) - 1]
        right = schedule.segments[schedule.segment_index(t)]
        assert abs(left.eta_at(t) - right.eta_at(t)) < 1e-14 * 7.0
        assert abs(left.positions_at(t)[0] - right.positions_at(t)[0]) < 1e-14


def test_validate_clean_schedule():
    schedule = ControlSchedule(
        (
            ramp_segment(0.0, 1.0, 0.0, 5.0, (0.3, 0.7)),
            hold_segment(1.0, 2.0, 5.0, (0.3, 0.7)),
            ramp_segment(2.0, 3.0, 5.0, 0.0, (0.3, 0.7)),
        ),
        2,
    )
    assert validate(schedule) == []


def test_validate_flags_crossing_positions():
    schedule = ControlSchedule(
        (move_segment(0.0, 1.0, 5.0, (0.3, 0.7), (0.8, 0.7), "transition_move"),),
        2,
    )
    kinds = {v.kind for v in validate(schedule, transition_slope=1.0)}
    assert "positions_intersect" in kinds


def test_validate_flags_slope_cap():
    # drift at 1e-3 against the default 1e-4 cap
    schedule = ControlSchedule(
        (move_segment(0.0, 10.0, 5.0, (0.4,), (0.41,), "adiabatic_move"),),
        1,
    )
    kinds = {v.kind for v in validate(schedule)}
    assert "slope_cap" in kinds
    # the same schedule passes once the cap is raised
    assert validate(schedule, adiabatic_slope_max=2e-3) == []


def test_validate_uses_declared_caps():
    segments = (move_segment(0.0, 10.0, 5.0, (0.4,), (0.41,), "adiabatic_move"),)
    declared = ControlSchedule(segments, 1, SlopeCaps(adiabatic_slope_max=2e-3))
    assert validate(declared) == []


def test_validate_flags_discontinuity():
    schedule = ControlSchedule(
        (
            hold_segment(0.0, 1.0, 5.0, (0.4,)),
            hold_segment(1.0, 2.0, 5.0, (0.5,)),
        ),
        1,
    )
    kinds = {v.kind for v in validate(schedule)}
    assert "position_discontinuity" in kinds


def test_validate_flags_negative_eta_and_motion_in_hold():
    schedule = ControlSchedule(
        (
            ScheduleSegment(
                "hold", 0.0, 1.0, EtaProfile.const(-2.0),
                (PositionProfile.linear(0.4, 0.5),),
            ),
        ),
        1,
    )
    kinds = {v.kind for v in validate(schedule)}
    assert "negative_eta" in kinds
    assert "unexpected_motion" in kinds


def test_validate_flags_slow_transition():
    schedule = ControlSchedule(
        (move_segment(0.0, 10.0, 5.0, (0.4,), (0.41,), "transition_move"),),
        1,
    )
    kinds = {v.kind for v in validate(schedule)}
    assert "transition_slope" in kinds


def test_json_round_trip(tmp_path):
    schedule = ControlSchedule(
        (
            ramp_segment(0.0, 1.0, 0.0, 5.0, (0.3, 0.7)),
            move_segment(1.0, 2.0, 5.0, (0.3, 0.7), (0.32, 0.7), "transition_move",
                         profile="cosine"),
            ramp_segment(2.0, 3.0, 5.0, 0.0, (0.32, 0.7)),
        ),
        2,
        SlopeCaps(adiabatic_slope_max=3e-4, transition_slope=1.0),
    )
    assert schedule_from_dict(schedule_to_dict(schedule)) == schedule
    path = tmp_path / "schedule.json"
    save_schedule(schedule, path)
    assert load_schedule(path) == schedule


def test_schedule_dict_shape():
    schedule = ControlSchedule((hold_segment(0.0, 2.0, 1.5, (0.4,)),), 1)
    data = schedule_to_dict(schedule)
    assert data["T"] == 2.0
    assert data["n_diracs"] == 1
    seg = data["segments"][0]
    assert set(seg) == {"kind", "t_begin", "t_end", "eta", "positions"}
    assert seg["eta"] == {"kind": "const", "value": 1.5}
    assert seg["positions"] == [{"kind": "const", "x0": 0.4, "x1": 0.4}]
