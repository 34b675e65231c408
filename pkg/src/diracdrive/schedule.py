"""Piecewise control schedules t -> (eta(t), a_1(t), ..., a_J(t)).

A schedule is a contiguous sequence of segments tiling [0, T].  Strength
ramps are cosine blends (zero derivative at both ends), positions are
constant or linear per segment.  Sampling is analytic and pure; segment
boundaries belong to the later segment.

Construction enforces only time tiling; physical requirements
(continuity, non-intersection, slope caps, eta >= 0) are audited by
`validate`, which returns violations as data.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SEGMENT_KINDS",
    "EtaProfile",
    "PositionProfile",
    "ScheduleSegment",
    "SlopeCaps",
    "ControlSchedule",
    "Violation",
    "eta_ramp",
    "validate",
    "hold_segment",
    "ramp_segment",
    "move_segment",
    "schedule_to_dict",
    "schedule_from_dict",
    "save_schedule",
    "load_schedule",
    "DEFAULT_ADIABATIC_SLOPE_MAX",
    "DEFAULT_TRANSITION_SLOPE",
]

SEGMENT_KINDS = ("eta_ramp_up", "eta_ramp_down", "hold", "adiabatic_move", "transition_move")

DEFAULT_ADIABATIC_SLOPE_MAX = 1e-4
DEFAULT_TRANSITION_SLOPE = 1.0


def eta_ramp(t: float, t_ramp: float, eta_max: float, direction: str = "up") -> float:
    """Cosine strength ramp eta_max * (1 - cos(pi t / T)) / 2.

    Endpoints are exactly 0 and eta_max and the derivative vanishes at
    both ends; "down" is the same profile time-reversed.
    """
    if t_ramp <= 0.0:
        raise ValueError(f"ramp duration must be positive, got {t_ramp}")
    if eta_max < 0.0:
        raise ValueError(f"eta_max must be non-negative, got {eta_max}")
    if not 0.0 <= t <= t_ramp:
        raise ValueError(f"t={t} outside ramp interval [0, {t_ramp}]")
    if direction == "down":
        t = t_ramp - t
    elif direction != "up":
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    if t == 0.0:
        return 0.0
    if t == t_ramp:
        return eta_max
    return 0.5 * eta_max * (1.0 - math.cos(math.pi * t / t_ramp))


@dataclass(frozen=True)
class EtaProfile:
    """Strength over one segment: constant, or a cosine blend start->end."""

    kind: str  # "const" | "cosine"
    eta_start: float
    eta_end: float

    def __post_init__(self):
        if self.kind not in ("const", "cosine"):
            raise ValueError(f"unknown eta profile kind {self.kind!r}")
        if self.kind == "const" and self.eta_start != self.eta_end:
            raise ValueError("const eta profile requires eta_start == eta_end")

    @classmethod
    def const(cls, value: float) -> "EtaProfile":
        return cls("const", float(value), float(value))

    @classmethod
    def cosine(cls, eta_start: float, eta_end: float) -> "EtaProfile":
        return cls("cosine", float(eta_start), float(eta_end))

    def value(self, tau):
        if self.kind == "const":
            return self.eta_start if np.isscalar(tau) else np.full_like(np.asarray(tau, float), self.eta_start)
        if np.isscalar(tau):
            if tau == 0.0:
                return self.eta_start
            if tau == 1.0:
                return self.eta_end
            blend = 0.5 * (1.0 - math.cos(math.pi * tau))
        else:
            tau = np.asarray(tau, dtype=float)
            blend = 0.5 * (1.0 - np.cos(np.pi * tau))
            blend = np.where(tau == 0.0, 0.0, np.where(tau == 1.0, 1.0, blend))
        return self.eta_start + (self.eta_end - self.eta_start) * blend


@dataclass(frozen=True)
class PositionProfile:
    """One Dirac position over a segment.

    "const" holds x0; "linear" interpolates x0 -> x1; "cosine" blends
    x0 -> x1 with zero end velocities and peak slope pi/2 times the mean
    (the smooth fast-window shape).
    """

    kind: str  # "const" | "linear" | "cosine"
    x0: float
    x1: float

    def __post_init__(self):
        if self.kind not in ("const", "linear", "cosine"):
            raise ValueError(f"unknown position profile kind {self.kind!r}")
        if self.kind == "const" and self.x0 != self.x1:
            raise ValueError("const position profile requires x0 == x1")

    @classmethod
    def const(cls, x: float) -> "PositionProfile":
        return cls("const", float(x), float(x))

    @classmethod
    def linear(cls, x0: float, x1: float) -> "PositionProfile":
        return cls("linear", float(x0), float(x1))

    @classmethod
    def cosine(cls, x0: float, x1: float) -> "PositionProfile":
        return cls("cosine", float(x0), float(x1))

    def value(self, tau):
        if self.kind == "const":
            return self.x0 if np.isscalar(tau) else np.full_like(np.asarray(tau, float), self.x0)
        if self.kind == "cosine":
            blend = 0.5 * (1.0 - np.cos(np.pi * tau)) if not np.isscalar(tau) else \
                0.5 * (1.0 - math.cos(math.pi * tau))
            return self.x0 + (self.x1 - self.x0) * blend
        return self.x0 + (self.x1 - self.x0) * tau

    def peak_slope_factor(self) -> float:
        """Peak |dx/dtau| relative to the mean slope |x1 - x0|."""
        return math.pi / 2.0 if self.kind == "cosine" else 1.0


@dataclass(frozen=True)
class ScheduleSegment:
    kind: str
    t_begin: float
    t_end: float
    eta: EtaProfile
    positions: tuple[PositionProfile, ...]

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not self.t_begin < self.t_end:
            raise ValueError(f"segment needs t_begin < t_end, got [{self.t_begin}, {self.t_end}]")
        object.__setattr__(self, "positions", tuple(self.positions))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_begin

    def tau(self, t):
        return (t - self.t_begin) / self.duration

    def eta_at(self, t):
        return self.eta.value(self.tau(t))

    def positions_at(self, t) -> tuple[float, ...]:
        tau = self.tau(t)
        return tuple(p.value(tau) for p in self.positions)

    def position_slopes(self) -> tuple[float, ...]:
        """Mean slopes (x1 - x0) / duration per point."""
        return tuple((p.x1 - p.x0) / self.duration for p in self.positions)

    def peak_position_slopes(self) -> tuple[float, ...]:
        return tuple(
            abs(p.x1 - p.x0) / self.duration * p.peak_slope_factor() for p in self.positions
        )


@dataclass(frozen=True)
class SlopeCaps:
    """Slope caps a planner declares for the schedule it emitted."""

    adiabatic_slope_max: float = DEFAULT_ADIABATIC_SLOPE_MAX
    transition_slope: float = DEFAULT_TRANSITION_SLOPE


@dataclass(frozen=True)
class ControlSchedule:
    segments: tuple[ScheduleSegment, ...]
    n_diracs: int
    caps: SlopeCaps | None = None

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        for i, seg in enumerate(segs):
            if len(seg.positions) != self.n_diracs:
                raise ValueError(
                    f"segment {i} carries {len(seg.positions)} positions, expected {self.n_diracs}"
                )
        span = segs[-1].t_end - segs[0].t_begin
        for left, right in zip(segs, segs[1:]):
            if abs(right.t_begin - left.t_end) > 1e-12 * max(1.0, span):
                raise ValueError(
                    f"segments must tile time contiguously; gap/overlap at t={left.t_end}"
                )
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", tuple(s.t_begin for s in segs))

    @property
    def t_start(self) -> float:
        return self.segments[0].t_begin

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def segment_index(self, t: float) -> int:
        """Segment containing t; boundaries belong to the later segment."""
        tol = 1e-9 * max(1.0, abs(self.t_end), abs(self.t_start))
        if not self.t_start - tol <= t <= self.t_end + tol:
            raise ValueError(f"t={t} outside schedule interval [{self.t_start}, {self.t_end}]")
        return min(max(bisect_right(self._starts, t) - 1, 0), len(self.segments) - 1)

    def sample(self, t: float):
        """Analytic (eta, positions) at time t."""
        seg = self.segments[self.segment_index(t)]
        t = min(max(t, seg.t_begin), seg.t_end)
        return seg.eta_at(t), seg.positions_at(t)

    def sample_many(self, times):
        """Vectorized sampling; returns (eta array, positions array (len, J))."""
        ts = np.asarray(times, dtype=float)
        etas = np.empty(ts.shape)
        positions = np.empty(ts.shape + (self.n_diracs,))
        for i, t in np.ndenumerate(ts):
            eta, pos = self.sample(float(t))
            etas[i] = eta
            positions[i] = pos
        return etas, positions

    def transition_windows(self) -> tuple[tuple[float, float], ...]:
        """Time intervals of all transition_move segments."""
        return tuple(
            (s.t_begin, s.t_end) for s in self.segments if s.kind == "transition_move"
        )


def hold_segment(t0, t1, eta, positions) -> ScheduleSegment:
    return ScheduleSegment(
        "hold", float(t0), float(t1), EtaProfile.const(eta),
        tuple(PositionProfile.const(x) for x in positions),
    )


def ramp_segment(t0, t1, eta_start, eta_end, positions) -> ScheduleSegment:
    kind = "eta_ramp_up" if eta_end >= eta_start else "eta_ramp_down"
    return ScheduleSegment(
        kind, float(t0), float(t1), EtaProfile.cosine(eta_start, eta_end),
        tuple(PositionProfile.const(x) for x in positions),
    )


def move_segment(t0, t1, eta, start_positions, end_positions, kind="adiabatic_move",
                 profile="linear") -> ScheduleSegment:
    if kind not in ("adiabatic_move", "transition_move"):
        raise ValueError(f"move segment kind must be adiabatic_move or transition_move, got {kind!r}")
    if profile not in ("linear", "cosine"):
        raise ValueError(f"move profile must be linear or cosine, got {profile!r}")
    make = PositionProfile.linear if profile == "linear" else PositionProfile.cosine
    profiles = tuple(
        PositionProfile.const(a) if a == b else make(a, b)
        for a, b in zip(start_positions, end_positions)
    )
    return ScheduleSegment(kind, float(t0), float(t1), EtaProfile.const(eta), profiles)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    segment: int | None = None


def validate(
    schedule: ControlSchedule,
    *,
    min_gap: float = 0.02,
    audit_per_segment: int = 10_000,
    adiabatic_slope_max: float | None = None,
    transition_slope: float | None = None,
    continuity_tol: float = 1e-9,
    slope_tol: float = 1e-6,
) -> list[Violation]:
    """Audit a schedule; an empty list means it is usable.

    Slope caps default to the schedule's declared caps when present,
    otherwise to the module defaults (1e-4 adiabatic, 1 transition).
    """
    caps = schedule.caps or SlopeCaps()
    adiabatic_cap = adiabatic_slope_max if adiabatic_slope_max is not None else caps.adiabatic_slope_max
    fast_slope = transition_slope if transition_slope is not None else caps.transition_slope
    violations: list[Violation] = []

    eta_scale = max(
        1.0, *(abs(s.eta.eta_start) for s in schedule.segments),
        *(abs(s.eta.eta_end) for s in schedule.segments),
    )
    for i, (left, right) in enumerate(zip(schedule.segments, schedule.segments[1:])):
        t = left.t_end
        if abs(left.eta_at(t) - right.eta_at(t)) > continuity_tol * eta_scale:
            violations.append(Violation("eta_discontinuity", f"eta jumps at t={t}", i))
        pos_left = np.asarray(left.positions_at(t))
        pos_right = np.asarray(right.positions_at(t))
        if pos_left.size and np.max(np.abs(pos_left - pos_right)) > 1e-12:
            violations.append(Violation("position_discontinuity", f"positions jump at t={t}", i))

    for i, seg in enumerate(schedule.segments):
        tau = np.linspace(0.0, 1.0, max(2, audit_per_segment))
        eta_vals = np.asarray(seg.eta.value(tau))
        if eta_vals.min() < 0.0:
            violations.append(Violation("negative_eta", f"eta < 0 inside segment {i}", i))
        if schedule.n_diracs:
            pos = np.stack([p.value(tau) for p in seg.positions])
            if np.min(pos) <= 0.0 or np.max(pos) >= 1.0:
                violations.append(Violation("position_outside", f"position leaves (0, 1) in segment {i}", i))
            if schedule.n_diracs > 1:
                gaps = np.diff(pos, axis=0)
                if gaps.min() < min_gap:
                    kind = "positions_intersect" if gaps.min() <= 0.0 else "min_gap"
                    violations.append(
                        Violation(kind, f"position gap {gaps.min():.3g} < {min_gap} in segment {i}", i)
                    )
        peaks = np.asarray(seg.peak_position_slopes()) if schedule.n_diracs else np.zeros(0)
        if seg.kind == "adiabatic_move":
            worst = peaks.max(initial=0.0)
            if worst > adiabatic_cap * (1.0 + slope_tol):
                violations.append(
                    Violation("slope_cap", f"adiabatic slope {worst:.3g} exceeds cap {adiabatic_cap:.3g}", i)
                )
        elif seg.kind == "transition_move":
            moving = peaks[peaks > 0.0]
            if moving.size == 0:
                violations.append(Violation("no_motion", f"transition segment {i} moves nothing", i))
            else:
                worst = moving.max()
                # A fast window must actually be fast, and never faster
                # than the declared transition slope cap.
                if worst > fast_slope * (1.0 + slope_tol):
                    violations.append(
                        Violation("transition_slope",
                                  f"transition peak slope {worst:.3g} exceeds {fast_slope:.3g}", i)
                    )
                elif worst < fast_slope / 20.0:
                    violations.append(
                        Violation("transition_slope",
                                  f"transition peak slope {worst:.3g} is not fast "
                                  f"(below {fast_slope:.3g}/20)", i)
                    )
        else:
            if peaks.max(initial=0.0) > 0.0:
                violations.append(
                    Violation("unexpected_motion", f"positions move during {seg.kind} segment {i}", i)
                )
    return violations


def _eta_to_dict(profile: EtaProfile) -> dict:
    if profile.kind == "const":
        return {"kind": "const", "value": profile.eta_start}
    return {"kind": "cosine", "eta_start": profile.eta_start, "eta_end": profile.eta_end}


def _eta_from_dict(data: dict) -> EtaProfile:
    if data["kind"] == "const":
        return EtaProfile.const(data["value"])
    if data["kind"] == "cosine":
        return EtaProfile.cosine(data["eta_start"], data["eta_end"])
    raise ValueError(f"unknown eta profile kind {data['kind']!r}")


def schedule_to_dict(schedule: ControlSchedule) -> dict:
    data = {
        "T": schedule.t_end,
        "n_diracs": schedule.n_diracs,
        "segments": [
            {
                "kind": seg.kind,
                "t_begin": seg.t_begin,
                "t_end": seg.t_end,
                "eta": _eta_to_dict(seg.eta),
                "positions": [
                    {"kind": p.kind, "x0": p.x0, "x1": p.x1} for p in seg.positions
                ],
            }
            for seg in schedule.segments
        ],
    }
    if schedule.caps is not None:
        data["caps"] = {
            "adiabatic_slope_max": schedule.caps.adiabatic_slope_max,
            "transition_slope": schedule.caps.transition_slope,
        }
    return data


def schedule_from_dict(data: dict) -> ControlSchedule:
    segments = tuple(
        ScheduleSegment(
            seg["kind"],
            float(seg["t_begin"]),
            float(seg["t_end"]),
            _eta_from_dict(seg["eta"]),
            tuple(
                PositionProfile(p["kind"], float(p["x0"]), float(p.get("x1", p["x0"])))
                for p in seg["positions"]
            ),
        )
        for seg in data["segments"]
    )
    caps = None
    if "caps" in data:
        caps = SlopeCaps(
            adiabatic_slope_max=float(data["caps"]["adiabatic_slope_max"]),
            transition_slope=float(data["caps"]["transition_slope"]),
        )
    return ControlSchedule(segments, int(data["n_diracs"]), caps)


def save_schedule(schedule: ControlSchedule, path) -> None:
    with open(path, "w") as fh:
        json.dump(schedule_to_dict(schedule), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schedule(path) -> ControlSchedule:
    with open(path) as fh:
        return schedule_from_dict(json.load(fh))
