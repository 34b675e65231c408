"""Post-run diagnostics: permutation fidelity, adiabaticity, continuity.

Everything here is pure post-processing over trajectory records.  Mode
populations can be read in two bases: the fixed sine basis (coefficient
magnitudes, what the permutation targets) and the instantaneous
eigenbasis of the Galerkin operator (what adiabatic theory conserves).
Instantaneous labels are tracked by eigenvector overlap so they follow
physical branches through avoided crossings instead of jumping with the
eigenvalue order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from diracdrive.hamiltonian import DiracConfig, assemble, eigendecompose, match_modes
from diracdrive.integrator import TrajectoryRecord, evolve
from diracdrive.schedule import ControlSchedule, move_segment, hold_segment
from diracdrive.spectral import BasisSpec, SpectralState, evaluate

__all__ = [
    "PermutationReport",
    "AdiabaticityReport",
    "CrossingGeometry",
    "SweepRow",
    "ContinuityCheck",
    "permutation_report",
    "adiabaticity_report",
    "slope_sweep",
    "continuity_check",
    "smoothed_ground_profile",
    "ground_state_at",
    "write_permutation_csv",
    "format_permutation_summary",
    "save_energy_chart",
]


@dataclass(frozen=True)
class PermutationReport:
    """Final-state magnitudes paired against initial ones.

    `pairing` lists (final_mode, source_mode): the run should end with
    |c_final(T)| = |c_source(0)|.  `residual_norm` is the l2 norm of the
    out-of-band tail (modes beyond the permuted block); `phases` are the
    unit phases of the final in-band coefficients (informational only),
    None where the magnitude vanishes.
    """

    sigma: tuple[int, ...]
    pairing: tuple[tuple[int, int], ...]
    target_magnitudes: np.ndarray
    achieved_magnitudes: np.ndarray
    coefficient_errors: np.ndarray
    residual_norm: float
    in_band_error: float
    phases: tuple[complex | None, ...]


def permutation_report(
    record: TrajectoryRecord,
    sigma,
    n_modes_permuted: int | None = None,
    pairing=None,
) -> PermutationReport:
    """Compare the final state against the permutation target.

    Without an explicit pairing, final mode k is paired with source mode
    sigma(k).  Planner-emitted plans carry the achieved pairing, which
    should be passed through here.
    """
    sigma = tuple(int(s) for s in sigma)
    m = n_modes_permuted or len(sigma)
    if m > record.basis.n_modes:
        raise ValueError("permuted block exceeds the basis size")
    if pairing is None:
        pairing = tuple((k, sigma[k - 1]) for k in range(1, m + 1))
    else:
        pairing = tuple((int(a), int(b)) for a, b in pairing)

    initial = record.states[0]
    final = record.states[-1]
    targets = np.array([abs(initial[src - 1]) for _, src in pairing])
    achieved = np.array([abs(final[fin - 1]) for fin, _ in pairing])
    errors = np.abs(achieved - targets)
    residual = float(np.sqrt(np.sum(np.abs(final[m:]) ** 2)))
    phases = tuple(
        (final[fin - 1] / abs(final[fin - 1])) if abs(final[fin - 1]) > 0.0 else None
        for fin, _ in pairing
    )
    return PermutationReport(
        sigma=sigma,
        pairing=pairing,
        target_magnitudes=targets,
        achieved_magnitudes=achieved,
        coefficient_errors=errors,
        residual_norm=residual,
        in_band_error=float(np.sqrt(np.sum(errors**2))),
        phases=phases,
    )


@dataclass(frozen=True)
class AdiabaticityReport:
    """Tracked instantaneous-mode populations along a run."""

    sample_times: np.ndarray
    energies: np.ndarray          # (n_samples, n_track), tracked labels
    initial_energies: np.ndarray
    max_drift: np.ndarray         # per mode, relative where initial > 0
    excluded: np.ndarray          # samples inside transition windows
    flagged: tuple[int, ...]      # samples with ambiguous tracking


def adiabaticity_report(
    record: TrajectoryRecord,
    schedule: ControlSchedule,
    n_track: int = 3,
    exclude_transitions: bool = True,
    overlap_floor: float = 0.5,
    window_pad: float = 0.0,
) -> AdiabaticityReport:
    """Project the state onto tracked instantaneous eigenmodes.

    Decompositions are recomputed from the schedule at the sample times;
    labels follow maximal-overlap tracking from sample to sample.  Drift
    is measured relative to each mode's initial population, skipping
    samples inside transition windows (the strategy is non-adiabatic
    there by design) and flagged ambiguous samples.
    """
    basis = record.basis
    times = record.sample_times
    n_samples = times.shape[0]
    energies = np.empty((n_samples, n_track))
    flagged: list[int] = []

    windows = schedule.transition_windows()
    excluded = np.zeros(n_samples, dtype=bool)
    if exclude_transitions:
        for t0, t1 in windows:
            excluded |= (times >= t0 - window_pad) & (times <= t1 + window_pad)

    prev_vectors = None
    labels = np.arange(n_track)
    for i, t in enumerate(times):
        eta, pos = float(record.eta_values[i]), tuple(record.positions[i])
        decomposition = eigendecompose(assemble(DiracConfig(max(eta, 0.0), pos), basis))
        vectors = decomposition.eigenvectors
        if prev_vectors is None:
            tracked = vectors[:, :n_track]
        else:
            perm, overlaps = match_modes(prev_vectors, vectors)
            if overlaps.min() < overlap_floor:
                flagged.append(i)
            tracked = vectors[:, perm]
        amplitudes = tracked.T @ record.states[i]
        energies[i] = np.abs(amplitudes) ** 2
        prev_vectors = tracked

    initial = energies[0].copy()
    keep = ~excluded
    keep[0] = True
    for idx in flagged:
        keep[idx] = False
    total = float(record.norm_sq[0])
    drift = np.empty(n_track)
    for k in range(n_track):
        deviation = np.max(np.abs(energies[keep, k] - initial[k]))
        # relative to the mode's own population when occupied, to the
        # total norm otherwise (an empty mode has no meaningful scale)
        scale = initial[k] if initial[k] > 1e-12 * total else total
        drift[k] = deviation / scale
    return AdiabaticityReport(
        sample_times=times,
        energies=energies,
        initial_energies=initial,
        max_drift=drift,
        excluded=excluded,
        flagged=tuple(flagged),
    )


def ground_state_at(basis: BasisSpec, eta: float, positions, mode: int = 1,
                    amplitude: complex = 1.0) -> SpectralState:
    """`amplitude` times the mode-th instantaneous eigenvector as a state."""
    decomposition = eigendecompose(assemble(DiracConfig(eta, tuple(positions)), basis))
    return SpectralState(amplitude * decomposition.eigenvectors[:, mode - 1], basis)


@dataclass(frozen=True)
class CrossingGeometry:
    """A single point moving linearly near a crossing site for a fixed time.

    The horizon is the same for every slope (the slope sets the distance
    covered): a unit slope traverses the full `width` across the
    crossing, small slopes barely move, so the sweep interpolates
    between a diabatic passage and a quasi-static hold.
    """

    eta: float = 2000.0
    center: float = 0.5
    width: float = 1e-2
    duration: float = 1e-2
    dt: float = 1e-3
    n_track: int = 3
    right_to_left: bool = True

    @property
    def start_position(self) -> float:
        sign = -1.0 if self.right_to_left else 1.0
        return self.center - sign * self.width / 2.0


@dataclass(frozen=True)
class SweepRow:
    slope: float
    duration: float
    final_position: float
    energies: np.ndarray      # populations of the first n_track final eigenmodes


def slope_sweep(slopes, initial: SpectralState, geometry: CrossingGeometry | None = None):
    """Move through (or toward) the crossing at each slope; report energies.

    Populations are measured in the instantaneous eigenbasis at the end
    of the run, after the fixed-duration linear move of each slope.
    """
    geometry = geometry or CrossingGeometry()
    sign = -1.0 if geometry.right_to_left else 1.0
    a_start = geometry.start_position
    basis = initial.basis
    horizon = geometry.duration
    rows = []
    for slope in slopes:
        slope = float(slope)
        if slope < 0.0:
            raise ValueError("slopes must be non-negative")
        a_final = a_start + sign * slope * horizon
        if not 0.0 < a_final < 1.0:
            raise ValueError(f"slope {slope} moves the point to {a_final}, outside (0, 1)")
        if slope == 0.0:
            segment = hold_segment(0.0, horizon, geometry.eta, (a_start,))
        else:
            segment = move_segment(0.0, horizon, geometry.eta, (a_start,), (a_final,),
                                   "transition_move")
        schedule = ControlSchedule((segment,), 1)
        record = evolve(initial, schedule, dt=min(geometry.dt, horizon / 10.0),
                        record_every=10**9)
        decomposition = eigendecompose(
            assemble(DiracConfig(geometry.eta, (a_final,)), basis)
        )
        amplitudes = decomposition.eigenvectors[:, : geometry.n_track].T @ record.states[-1]
        rows.append(SweepRow(slope, horizon, a_final, np.abs(amplitudes) ** 2))
    return rows


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        raw = np.where(u > 0.0, np.exp(-1.0 / np.clip(u, 1e-300, None)), 0.0)
        comp = np.where(u < 1.0, np.exp(-1.0 / np.clip(1.0 - u, 1e-300, None)), 0.0)
    return raw / (raw + comp)


def smoothed_ground_profile(basis: BasisSpec, support_end: float,
                            ramp_width: float = 0.08,
                            pin_points=()) -> SpectralState:
    """In-band, normalized first split-mode profile vanishing beyond support_end.

    sin(pi x / support_end) multiplied by a C-infinity cutoff reaching
    zero at support_end, projected onto the sine basis by composite
    Simpson quadrature.  The truncated series is then pinned to vanish
    at `pin_points` (e.g. a grid across the band a point sweeps) by the
    minimal-norm coefficient correction, so the continuity check's
    vanishing precondition holds with margin at finite N.
    """
    if not 0.0 < support_end < 1.0:
        raise ValueError("support_end must lie in (0, 1)")
    if not 0.0 < ramp_width < support_end:
        raise ValueError("ramp_width must lie in (0, support_end)")
    n_quad = 8192
    x = np.linspace(0.0, support_end, n_quad + 1)
    cutoff = _smooth_step((support_end - x) / ramp_width)
    values = np.sin(np.pi * x / support_end) * cutoff
    table = np.sqrt(2.0) * np.sin(np.outer(basis.wavenumbers, x))
    from scipy.integrate import simpson

    coeffs = simpson(table * values, x=x, axis=1)
    pins = np.atleast_1d(np.asarray(pin_points, dtype=float))
    if pins.size:
        rows = np.sqrt(2.0) * np.sin(np.outer(pins, basis.wavenumbers))
        coeffs = coeffs - np.linalg.pinv(rows, rcond=1e-12) @ (rows @ coeffs)
    coeffs = coeffs / np.linalg.norm(coeffs)
    return SpectralState(coeffs.astype(complex), basis)


@dataclass(frozen=True)
class ContinuityCheck:
    """Measured growth of ||psi - f||^2 against the continuity bound."""

    t1: float
    t2: float
    growth: float
    bound: float
    constant: float
    passed: bool


def continuity_check(
    record: TrajectoryRecord,
    schedule: ControlSchedule,
    profile,
    t1: float,
    t2: float,
    vanish_tol: float = 1e-6,
    slack: float = 1e-6,
) -> ContinuityCheck:
    """Evaluate the short-window continuity bound on recorded data.

    `profile` is a frozen SpectralState or a callable t -> SpectralState
    vanishing at every point position throughout [t1, t2]; the bound
    constant is 2 sup_t (||psi(t1)|| ||f''(t)|| + (||f|| + ||psi(t1)||)
    ||df/dt||), with df/dt from sample differences for time-indexed
    profiles and zero for frozen ones.
    """
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    mask = (record.sample_times >= t1 - 1e-12) & (record.sample_times <= t2 + 1e-12)
    indices = np.nonzero(mask)[0]
    if indices.size < 2:
        raise ValueError("fewer than two samples inside [t1, t2]; record more densely")
    times = record.sample_times[indices]

    frozen = isinstance(profile, SpectralState)
    profiles = [profile if frozen else profile(float(t)) for t in times]
    basis = record.basis
    nu = basis.laplacian_eigenvalues

    # Vanishing precondition at every point position over the window.
    for state, idx in zip(profiles, indices):
        positions = record.positions[idx]
        f_norm = math.sqrt(state.norm_sq)
        if positions.size:
            values = np.abs(evaluate(state, positions))
            if np.max(values) > vanish_tol * f_norm:
                raise ValueError(
                    f"profile does not vanish at the point positions "
                    f"(|f(a)| = {np.max(values):.3g} > {vanish_tol:.1g} * ||f||)"
                )

    psi1 = record.states[indices[0]]
    psi1_norm = float(np.linalg.norm(psi1))
    sup_term = 0.0
    for i, state in enumerate(profiles):
        coeffs = state.coefficients
        f_norm = float(np.linalg.norm(coeffs))
        fxx_norm = float(np.linalg.norm(nu * coeffs))
        if frozen or i + 1 >= len(profiles):
            ft_norm = 0.0
        else:
            dt_sample = times[i + 1] - times[i]
            ft_norm = float(
                np.linalg.norm(profiles[i + 1].coefficients - coeffs) / dt_sample
            )
        sup_term = max(sup_term, psi1_norm * fxx_norm + (f_norm + psi1_norm) * ft_norm)
    constant = 2.0 * sup_term

    deviations = np.array(
        [
            float(np.sum(np.abs(record.states[idx] - state.coefficients) ** 2))
            for idx, state in zip(indices, profiles)
        ]
    )
    growth = float(np.max(deviations) - deviations[0])
    bound = constant * (t2 - t1)
    return ContinuityCheck(
        t1=t1, t2=t2, growth=growth, bound=bound, constant=constant,
        passed=growth <= bound + slack,
    )


def write_permutation_csv(report: PermutationReport, path) -> None:
    """Per-pair CSV plus residual row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["final_mode", "source_mode", "target_magnitude", "achieved_magnitude",
             "abs_error", "phase_re", "phase_im"]
        )
        for (fin, src), target, achieved, err, phase in zip(
            report.pairing, report.target_magnitudes, report.achieved_magnitudes,
            report.coefficient_errors, report.phases,
        ):
            phase_re = f"{phase.real:.17g}" if phase is not None else ""
            phase_im = f"{phase.imag:.17g}" if phase is not None else ""
            writer.writerow(
                [fin, src, f"{target:.17g}", f"{achieved:.17g}", f"{err:.17g}",
                 phase_re, phase_im]
            )
        writer.writerow(["residual_norm", "", f"{report.residual_norm:.17g}", "", "", "", ""])


def format_permutation_summary(
    report: PermutationReport,
    reference_residual: float | None = None,
    reference_errors=None,
    residual_tol: float | None = None,
    error_tol: float | None = None,
) -> str:
    """Human-readable block: target vs achieved, residual, pass/fail."""
    lines = ["permutation report"]
    lines.append(f"  sigma: {report.sigma}")
    for i, ((fin, src), target, achieved, err) in enumerate(
        zip(report.pairing, report.target_magnitudes, report.achieved_magnitudes,
            report.coefficient_errors)
    ):
        ref = ""
        if reference_errors is not None:
            ref = f"  (reference {reference_errors[i]:.3g})"
        lines.append(
            f"  |c_{fin}(T)| = {achieved:.6f} vs |c_{src}(0)| = {target:.6f}"
            f"  error {err:.3g}{ref}"
        )
    ref = f"  (reference {reference_residual:.3g})" if reference_residual else ""
    lines.append(f"  out-of-band residual ||w|| = {report.residual_norm:.4g}{ref}")
    if residual_tol is not None:
        ok = report.residual_norm <= residual_tol
        lines.append(f"  residual within {residual_tol:.3g}: {'pass' if ok else 'FAIL'}")
    if error_tol is not None:
        ok = bool(np.all(report.coefficient_errors <= error_tol))
        lines.append(f"  all coefficient errors within {error_tol:.3g}: {'pass' if ok else 'FAIL'}")
    return "\n".join(lines)


def save_energy_chart(record: TrajectoryRecord, path, n_modes: int = 4) -> None:
    """SVG line chart of sine-mode energies over time (offline rendering)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8.0, 4.5))
    for k in range(min(n_modes, record.basis.n_modes)):
        ax.plot(record.sample_times, record.mode_energy[:, k], label=f"mode {k + 1}")
    ax.set_xlabel("time")
    ax.set_ylabel("mode energy")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
