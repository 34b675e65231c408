"""Synthesis of quasi-adiabatic permutation schedules.

The strategy: ramp the point strengths up while the M modes localize in
the M subintervals cut by J = M-1 points, move the points one at a time
so the subinterval lengths end up re-ranked by the requested
permutation, then ramp the strengths back down.  Motion is slow except
in short fast windows centered where two subinterval lengths coincide;
a fast traversal keeps the energy in its subinterval while the
eigenvalue ranks swap, which is what permutes the modes.

Because a single point moves at a time, every length coincidence is the
root of an affine equation and is computed exactly.  Fast windows that
overlap or touch are merged into one transition segment; the distinct
crossing sites are still reported individually.

Conventions: interval i (0-based, i = 0..M-1) spans consecutive points;
sigma is 1-based with interval sigma(r)-1 receiving final length rank r,
so the final mode r carries the initial energy of mode sigma(r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from diracdrive.schedule import (
    ControlSchedule,
    ScheduleSegment,
    SlopeCaps,
    hold_segment,
    move_segment,
    ramp_segment,
)

__all__ = [
    "PlannerParams",
    "TransitionEvent",
    "PermutationPlan",
    "PlanInfeasibleError",
    "plan_permutation",
    "default_start_positions",
]

_ROOT_TOL = 1e-9


class PlanInfeasibleError(ValueError):
    """Raised when the requested horizon cannot hold the plan."""

    def __init__(self, message: str, required_time: float | None = None):
        if required_time is not None:
            message = f"{message} (minimum feasible T is about {required_time:.6g})"
        super().__init__(message)
        self.required_time = required_time


@dataclass(frozen=True)
class PlannerParams:
    eta_max: float = 2000.0
    total_time: float = 200.0
    adiabatic_slope: float = 1e-4       # nominal drift slope target
    adiabatic_slope_max: float = 1e-3   # hard cap on budget-derived drift slopes
    transition_slope: float = 1.0
    transition_width: float = 1e-2
    transition_profile: str = "cosine"  # "cosine" (smooth pulse) or "linear"
    transition_duration_factor: float = 5.0  # cosine pulse time = factor * width / slope
    margin: float = 0.05
    min_gap: float = 0.02
    min_dwell: float = 1.0
    ramp_fraction: float = 0.25
    start_positions: tuple[float, ...] | None = None
    final_positions: tuple[float, ...] | None = None
    taper_shrink: float = 0.85

    def fast_window_duration(self, width: float) -> float:
        """Traversal time of one fast window of the given spatial width.

        Linear windows cross at transition_slope.  Cosine windows swap
        the near-degenerate pair just as diabatically but stretch the
        traversal (peak slope pi/2 * slope/factor), which suppresses the
        leakage into distant modes by orders of magnitude.
        """
        if self.transition_profile == "linear":
            return width / self.transition_slope
        return self.transition_duration_factor * width / self.transition_slope


@dataclass(frozen=True)
class TransitionEvent:
    """One pair of subinterval lengths coinciding while a point moves."""

    dirac: int                   # 1-based moving point
    position: float              # crossing site x*
    intervals: tuple[int, int]   # 0-based intervals whose lengths coincide
    time: float                  # when the point passes x*


@dataclass(frozen=True)
class PermutationPlan:
    sigma: tuple[int, ...]
    start_positions: tuple[float, ...]
    final_positions: tuple[float, ...]
    move_order: tuple[tuple[int, float], ...]   # (dirac, target position)
    events: tuple[TransitionEvent, ...]
    n_transition_sites: int                      # distinct crossing sites
    pairing: tuple[tuple[int, int], ...]         # (final mode, source mode)
    max_drift_slope: float
    min_feasible_time: float


def _as_sigma(sigma) -> tuple[int, ...]:
    perm = tuple(int(s) for s in sigma)
    if len(perm) < 2:
        raise ValueError("a permutation of at least 2 modes is required")
    if sorted(perm) != list(range(1, len(perm) + 1)):
        raise ValueError(f"sigma must be a permutation of 1..{len(perm)}, got {perm}")
    return perm


def _lengths(positions) -> np.ndarray:
    edges = np.concatenate(([0.0], np.asarray(positions, dtype=float), [1.0]))
    return np.diff(edges)


def _check_positions(positions, params: PlannerParams, label: str) -> None:
    pos = np.asarray(positions, dtype=float)
    if np.any(np.diff(pos) < params.min_gap):
        raise ValueError(f"{label} positions closer than min_gap={params.min_gap}: {positions}")
    if pos.min() < params.margin or pos.max() > 1.0 - params.margin:
        raise ValueError(
            f"{label} positions must stay within [{params.margin}, {1 - params.margin}]: {positions}"
        )


def _check_start_lengths(lengths: np.ndarray) -> None:
    if np.any(np.diff(lengths) >= 0.0):
        raise ValueError(f"start lengths must be strictly decreasing, got {lengths}")
    if lengths[-1] <= lengths[0] / 2.0:
        raise ValueError(
            f"every start length must exceed half the largest; got {lengths}"
        )


def default_start_positions(n_modes: int, params: PlannerParams | None = None) -> tuple[float, ...]:
    """Default point placements giving strictly decreasing lengths.

    M=3 and M=4 use the reference experiment placements; other M use an
    arithmetic length taper normalized to sum 1, with the taper strength
    at 90% of the tightest bound from the factor-2 and margin rules.
    """
    params = params or PlannerParams()
    if n_modes == 3:
        return (0.36, 0.7)
    if n_modes == 4:
        return (0.27, 0.53, 0.77)
    m = n_modes
    gamma = 0.9 * min(2.0 / (3.0 * (m - 1)), 2.0 * (1.0 - m * params.margin) / (m - 1))
    if gamma <= 0.0:
        raise ValueError(f"margins {params.margin} leave no room for {m} decreasing lengths")
    j = np.arange(1, m + 1)
    lengths = (1.0 + gamma * (m + 1 - 2 * j) / 2.0) / m
    return tuple(np.cumsum(lengths)[:-1])


def _final_ranks(sigma: tuple[int, ...]) -> list[int]:
    """rank_f[i]: final length rank (1 = largest) of interval i."""
    return [sigma.index(i + 1) + 1 for i in range(len(sigma))]


def _generic_final_positions(start_lengths, sigma, shrink: float) -> tuple[float, ...]:
    """Final lengths: start taper shrunk toward uniform, reassigned by rank.

    Reusing the start lengths verbatim would park a moved length exactly
    on an unmoved equal one (a crossing at a move endpoint), so the
    taper is shrunk toward uniform.  A small golden-ratio jitter then
    breaks the arithmetic spacing of the default taper; equally spaced
    lengths make pair-sums collide, which stacks three-way length
    coincidences onto single move positions for some permutations.
    """
    m = len(start_lengths)
    mean = 1.0 / m
    deviations = shrink * (np.asarray(start_lengths) - mean)
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    jitter = 1.0 + 0.05 * (np.mod(np.arange(1, m + 1) * golden, 1.0) - 0.5)
    deviations = deviations * jitter
    deviations -= deviations.mean()
    shrunk = mean + deviations
    ranks = _final_ranks(sigma)
    final_lengths = np.array([shrunk[r - 1] for r in ranks])
    return tuple(np.cumsum(final_lengths)[:-1])


_PAPER_M3 = {"sigma": (2, 3, 1), "start": (0.36, 0.7), "final": (0.31, 0.68)}
_PAPER_M4 = {
    "sigma": (2, 4, 3, 1),
    "start": (0.27, 0.53, 0.77),
    "final": (0.26, 0.49, 0.73),
    "moves": ((1, 0.26), (2, 0.50), (3, 0.73), (2, 0.49)),
}


@dataclass
class _Move:
    dirac: int
    x_start: float
    target: float
    sites: list[float] = field(default_factory=list)           # travel-ordered
    events_by_site: dict[float, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def travel(self) -> float:
        return abs(self.target - self.x_start)

    @property
    def direction(self) -> float:
        return 1.0 if self.target >= self.x_start else -1.0


def _collect_crossings(move: _Move, current: list[float], n_intervals: int) -> None:
    """Exact affine roots where a moving length meets another length."""
    j = move.dirac
    left = current[j - 2] if j >= 2 else 0.0
    right = current[j] if j <= len(current) - 1 else 1.0
    lengths = _lengths(current)
    lo, hi = sorted((move.x_start, move.target))

    candidates: list[tuple[float, tuple[int, int]]] = []
    for i in range(n_intervals):
        if i in (j - 1, j):
            continue
        value = lengths[i]
        candidates.append((left + value, (min(j - 1, i), max(j - 1, i))))
        candidates.append((right - value, (min(j, i), max(j, i))))
    candidates.append(((left + right) / 2.0, (j - 1, j)))

    hits: list[tuple[float, tuple[int, int]]] = []
    for root, pair in candidates:
        if lo + _ROOT_TOL < root < hi - _ROOT_TOL:
            hits.append((root, pair))
        elif abs(root - lo) <= _ROOT_TOL or abs(root - hi) <= _ROOT_TOL:
            raise ValueError(
                f"a length coincidence of intervals {pair} falls on a move endpoint "
                f"(x={root:.12g}) for point {j}; adjust the target positions"
            )

    hits.sort(key=lambda item: move.direction * item[0])
    for root, pair in hits:
        site = None
        for existing in move.sites:
            if abs(existing - root) <= _ROOT_TOL:
                site = existing
                break
        if site is None:
            move.sites.append(root)
            move.events_by_site[root] = [pair]
        else:
            for other in move.events_by_site[site]:
                if set(other) & set(pair):
                    raise ValueError(
                        f"three interval lengths coincide at x={root:.12g} during the "
                        f"move of point {j}; adjust the target positions"
                    )
            move.events_by_site[site].append(pair)


def _merged_windows(move: _Move, width: float):
    """Fast windows in travel coordinates, clamped and merged."""
    d = move.direction
    u0, u1 = d * move.x_start, d * move.target
    windows: list[list[float]] = []
    for site in move.sites:
        entry = max(d * site - width / 2.0, u0)
        exit_ = min(d * site + width / 2.0, u1)
        if windows and entry <= windows[-1][1] + _ROOT_TOL:
            windows[-1][1] = max(windows[-1][1], exit_)
        else:
            windows.append([entry, exit_])
    return windows, u0, u1


def plan_permutation(sigma, params: PlannerParams | None = None):
    """Build a (PermutationPlan, ControlSchedule) realizing sigma.

    Phases: strength ramp 0 -> eta_max over the first quarter of the
    horizon at the start placements, sequential point moves over the
    middle half (time shared proportionally to travel distance), ramp
    back to 0 over the last quarter at the final placements.
    """
    sigma = _as_sigma(sigma)
    params = params or PlannerParams()
    m = len(sigma)
    n_diracs = m - 1
    total_time = params.total_time
    if total_time <= 0.0:
        raise ValueError("total_time must be positive")

    start = tuple(float(x) for x in (params.start_positions or default_start_positions(m, params)))
    if len(start) != n_diracs:
        raise ValueError(f"{len(start)} start positions for a permutation of {m} modes")
    _check_positions(start, params, "start")
    start_lengths = _lengths(start)
    _check_start_lengths(start_lengths)

    moves_spec: tuple[tuple[int, float], ...] | None = None
    if params.final_positions is not None:
        final = tuple(float(x) for x in params.final_positions)
    elif sigma == _PAPER_M3["sigma"] and start == _PAPER_M3["start"]:
        final = _PAPER_M3["final"]
    elif sigma == _PAPER_M4["sigma"] and start == _PAPER_M4["start"]:
        final = _PAPER_M4["final"]
        moves_spec = _PAPER_M4["moves"]
    elif sigma == tuple(range(1, m + 1)):
        final = start
    else:
        final = _generic_final_positions(start_lengths, sigma, params.taper_shrink)
    if len(final) != n_diracs:
        raise ValueError(f"{len(final)} final positions for a permutation of {m} modes")
    _check_positions(final, params, "final")
    final_lengths = _lengths(final)
    if final_lengths.min() <= final_lengths.max() / 2.0:
        raise ValueError(
            f"every final length must exceed half the largest; got {final_lengths}"
        )

    if moves_spec is None:
        moves_spec = tuple(
            (j + 1, final[j]) for j in range(n_diracs) if abs(final[j] - start[j]) > _ROOT_TOL
        )

    # Walk the moves, collecting exact crossing sites.
    current = list(start)
    moves: list[_Move] = []
    for dirac, target in moves_spec:
        move = _Move(dirac, current[dirac - 1], float(target))
        if move.travel <= _ROOT_TOL:
            continue
        _collect_crossings(move, current, m)
        current[dirac - 1] = float(target)
        _check_positions(current, params, f"intermediate (after point {dirac})")
        moves.append(move)
    if tuple(current) != final and any(
        abs(a - b) > 1e-12 for a, b in zip(current, final)
    ):
        raise ValueError("move sequence does not reach the final positions")

    # Time layout.
    ramp_time = params.ramp_fraction * total_time
    t_move0, t_move1 = ramp_time, total_time - ramp_time
    movement_time = t_move1 - t_move0
    if movement_time <= 0.0:
        raise ValueError("ramp_fraction leaves no movement phase")
    total_travel = sum(mv.travel for mv in moves)

    segments: list[ScheduleSegment] = [
        ramp_segment(0.0, t_move0, 0.0, params.eta_max, start)
    ]
    events: list[TransitionEvent] = []
    max_slope = 0.0
    fast_time_total = 0.0
    drift_total_all = 0.0

    def feasible_time(slope: float) -> float:
        need = fast_time_total_est + drift_total_est / slope
        return 1.01 * need / (1.0 - 2.0 * params.ramp_fraction)

    # Pre-estimate for error messages.
    fast_time_total_est = 0.0
    drift_total_est = 0.0
    for mv in moves:
        windows, u0, u1 = _merged_windows(mv, params.transition_width)
        fast_time_total_est += sum(params.fast_window_duration(x - e) for e, x in windows)
        drift_total_est += mv.travel - sum(x - e for e, x in windows)

    if not moves:
        segments.append(hold_segment(t_move0, t_move1, params.eta_max, start))
    current = list(start)
    cumulative_travel = 0.0
    t_cursor = t_move0
    for mv in moves:
        cumulative_travel += mv.travel
        t_end_move = t_move0 + movement_time * (cumulative_travel / total_travel)
        budget = t_end_move - t_cursor
        windows, u0, u1 = _merged_windows(mv, params.transition_width)
        fast_time = sum(params.fast_window_duration(x - e) for e, x in windows)
        drift_dist = mv.travel - sum((x - e) for e, x in windows)
        if budget <= fast_time:
            raise PlanInfeasibleError(
                f"move of point {mv.dirac} has {budget:.4g} time units but needs "
                f"{fast_time:.4g} for its fast windows",
                required_time=feasible_time(params.adiabatic_slope_max),
            )
        pieces: list[tuple[str, float, float]] = []  # (kind, u_from, u_to)
        u_cursor = u0
        for entry, exit_ in windows:
            if entry > u_cursor + _ROOT_TOL:
                pieces.append(("adiabatic_move", u_cursor, entry))
            pieces.append(("transition_move", entry, exit_))
            u_cursor = exit_
        if u1 > u_cursor + _ROOT_TOL:
            pieces.append(("adiabatic_move", u_cursor, u1))

        # A fast window clamped to a move boundary would butt against the
        # neighbouring move's window; bracket such moves with settling holds.
        pad_before = params.min_dwell / 2.0 if pieces[0][0] == "transition_move" else 0.0
        pad_after = params.min_dwell / 2.0 if pieces[-1][0] == "transition_move" else 0.0

        if drift_dist > _ROOT_TOL:
            usable = budget - fast_time - pad_before - pad_after
            if usable <= 0.0:
                raise PlanInfeasibleError(
                    f"move of point {mv.dirac} cannot fit its fast windows and dwells",
                    required_time=feasible_time(params.adiabatic_slope_max),
                )
            slope = drift_dist / usable
            if slope > params.adiabatic_slope_max:
                raise PlanInfeasibleError(
                    f"drift slope {slope:.4g} for point {mv.dirac} exceeds the cap "
                    f"{params.adiabatic_slope_max:.4g}",
                    required_time=feasible_time(params.adiabatic_slope_max),
                )
            max_slope = max(max_slope, slope)
            durations = [
                params.fast_window_duration(b - a) if kind == "transition_move"
                else (b - a) / slope
                for kind, a, b in pieces
            ]
            if pad_before > 0.0:
                pieces = [("hold", u0, u0), *pieces]
                durations = [pad_before, *durations]
            if pad_after > 0.0:
                pieces = [*pieces, ("hold", u1, u1)]
                durations = [*durations, pad_after]
        else:
            # Windows cover the whole travel: pad with holds around them.
            leftover = budget - fast_time
            durations = [params.fast_window_duration(b - a) for _, a, b in pieces]
            pieces = [("hold", u0, u0), *pieces, ("hold", u1, u1)]
            durations = [leftover / 2.0, *durations, leftover / 2.0]

        boundaries = [t_cursor]
        for dur in durations:
            boundaries.append(boundaries[-1] + dur)
        boundaries[-1] = t_end_move
        d = mv.direction
        for (kind, a, b), piece_t0, piece_t1 in zip(pieces, boundaries, boundaries[1:]):
            x_from, x_to = d * a, d * b
            pos_from = list(current_positions(mv, current, x_from))
            pos_to = list(current_positions(mv, current, x_to))
            if kind == "hold":
                segments.append(hold_segment(piece_t0, piece_t1, params.eta_max, pos_from))
            else:
                profile = params.transition_profile if kind == "transition_move" else "linear"
                segments.append(
                    move_segment(piece_t0, piece_t1, params.eta_max, pos_from, pos_to,
                                 kind, profile=profile)
                )
            if kind == "transition_move":
                duration = piece_t1 - piece_t0
                for site in mv.sites:
                    if a - _ROOT_TOL <= d * site <= b + _ROOT_TOL:
                        xi = min(max((d * site - a) / (b - a), 0.0), 1.0)
                        if params.transition_profile == "cosine":
                            t_hit = piece_t0 + duration / math.pi * math.acos(1.0 - 2.0 * xi)
                        else:
                            t_hit = piece_t0 + duration * xi
                        for pair in mv.events_by_site[site]:
                            events.append(TransitionEvent(mv.dirac, site, pair, t_hit))
        fast_time_total += fast_time
        drift_total_all += drift_dist
        t_cursor = t_end_move
        current[mv.dirac - 1] = mv.target

    segments.append(ramp_segment(t_move1, total_time, params.eta_max, 0.0, final))

    # Dwell audit between consecutive fast windows.
    fast_spans = [(s.t_begin, s.t_end) for s in segments if s.kind == "transition_move"]
    for (_, prev_end), (next_begin, _) in zip(fast_spans, fast_spans[1:]):
        dwell = next_begin - prev_end
        if dwell < params.min_dwell:
            raise PlanInfeasibleError(
                f"only {dwell:.4g} time units between consecutive fast windows "
                f"(minimum dwell {params.min_dwell})",
                required_time=1.05 * total_time * params.min_dwell / max(dwell, 1e-12),
            )

    caps = SlopeCaps(
        adiabatic_slope_max=max(params.adiabatic_slope, max_slope) * (1.0 + 1e-9),
        transition_slope=params.transition_slope,
    )
    schedule = ControlSchedule(tuple(segments), n_diracs, caps)

    ranks = np.argsort(-final_lengths, kind="stable")
    rank_of_interval = np.empty(m, dtype=int)
    rank_of_interval[ranks] = np.arange(1, m + 1)
    pairing = tuple(
        sorted((int(rank_of_interval[i]), i + 1) for i in range(m))
    )
    sites_total = sum(len(mv.sites) for mv in moves)
    min_feasible = (
        1.01 * (fast_time_total + drift_total_all / params.adiabatic_slope_max)
        / (1.0 - 2.0 * params.ramp_fraction)
        if moves
        else 0.0
    )
    plan = PermutationPlan(
        sigma=sigma,
        start_positions=start,
        final_positions=final,
        move_order=tuple((mv.dirac, mv.target) for mv in moves),
        events=tuple(events),
        n_transition_sites=sites_total,
        pairing=pairing,
        max_drift_slope=max_slope,
        min_feasible_time=min_feasible,
    )
    return plan, schedule


def current_positions(move: _Move, current: list[float], x_moving: float) -> tuple[float, ...]:
    """Positions with the moving point at x_moving, others frozen."""
    out = list(current)
    out[move.dirac - 1] = x_moving
    return tuple(out)
