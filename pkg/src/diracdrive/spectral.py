"""Sine-basis spectral states on the unit interval.

The basis is w_k(x) = sqrt(2) sin(k pi x), k = 1..N, orthonormal in
L2(0,1) with Dirichlet walls and Laplacian eigenvalues nu_k = (k pi)^2.
A state is the complex coefficient vector of a truncated expansion.
Mode indices are 1-based in file formats and reports, 0-based in array
storage.

All operations here are pure functions over immutable values; energies
on subintervals come from the closed-form sine cross-Gram integrals, so
they are exact for the truncated series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisSpec",
    "SpectralState",
    "evaluate",
    "mode_energies",
    "subinterval_energy",
    "cumulative_energy",
    "state_from_modes",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class BasisSpec:
    """Truncation dimension N of the sine basis."""

    n_modes: int

    def __post_init__(self):
        if not isinstance(self.n_modes, (int, np.integer)) or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        object.__setattr__(self, "n_modes", int(self.n_modes))

    @property
    def wavenumbers(self) -> np.ndarray:
        """k*pi for k = 1..N."""
        return np.pi * np.arange(1, self.n_modes + 1)

    @property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """nu_k = (k pi)^2."""
        return self.wavenumbers**2


@dataclass(frozen=True)
class SpectralState:
    """Complex coefficient vector over a BasisSpec; immutable."""

    coefficients: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=complex)
        if coeffs.ndim != 1 or coeffs.shape[0] != self.basis.n_modes:
            raise ValueError(
                f"coefficient vector must have length {self.basis.n_modes}, "
                f"got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    @property
    def norm_sq(self) -> float:
        """Squared L2 norm, sum_k |c_k|^2 (Parseval)."""
        return float(np.sum(np.abs(self.coefficients) ** 2))


def state_from_modes(basis: BasisSpec, amplitudes) -> SpectralState:
    """Build a state from leading-mode amplitudes, zero-padded to N."""
    amps = np.asarray(list(amplitudes), dtype=complex)
    if amps.shape[0] > basis.n_modes:
        raise ValueError(f"{amps.shape[0]} amplitudes exceed basis size {basis.n_modes}")
    coeffs = np.zeros(basis.n_modes, dtype=complex)
    coeffs[: amps.shape[0]] = amps
    return SpectralState(coeffs, basis)


def evaluate(state: SpectralState, points) -> np.ndarray:
    """Pointwise values sum_k c_k sqrt(2) sin(k pi x) at points in [0, 1]."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError("evaluation points must lie in [0, 1]")
    table = np.sqrt(2.0) * np.sin(np.outer(pts, state.basis.wavenumbers))
    # Dirichlet walls: pin the boundary values exactly, sin(k*pi*1.0) is not
    # an exact float zero.
    table[(pts == 0.0) | (pts == 1.0), :] = 0.0
    return table @ state.coefficients


def mode_energies(state: SpectralState) -> np.ndarray:
    """Per-mode energies (|c_1|^2, ..., |c_N|^2)."""
    return np.abs(state.coefficients) ** 2


@lru_cache(maxsize=8)
def _index_grids(n: int):
    k = np.arange(1, n + 1)
    diff = (k[:, None] - k[None, :]).astype(float)
    summ = (k[:, None] + k[None, :]).astype(float)
    diff.setflags(write=False)
    summ.setflags(write=False)
    return diff, summ


def _energy_antiderivative(basis: BasisSpec, x: float) -> np.ndarray:
    """Matrix F(x) with F(c)-F(b) the cross-Gram of the sines on [b, c].

    Entries: integral of 2 sin(m pi t) sin(n pi t) from 0 to x, i.e.
    sin((m-n) pi x)/((m-n) pi) - sin((m+n) pi x)/((m+n) pi), with the
    diagonal limit x - sin(2 m pi x)/(2 m pi).
    """
    diff, summ = _index_grids(basis.n_modes)
    with np.errstate(invalid="ignore", divide="ignore"):
        t1 = np.sin(diff * (np.pi * x)) / (diff * np.pi)
    np.fill_diagonal(t1, x)
    t2 = np.sin(summ * (np.pi * x)) / (summ * np.pi)
    return t1 - t2


def cumulative_energy(state: SpectralState, x: float) -> float:
    """Integral of |psi_N|^2 over [0, x], closed form."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    c = state.coefficients
    return float(np.real(np.conj(c) @ (_energy_antiderivative(state.basis, x) @ c)))


def subinterval_energy(state: SpectralState, interval) -> float:
    """Integral of |psi_N|^2 over [b, c] with 0 <= b < c <= 1."""
    b, c = float(interval[0]), float(interval[1])
    if not (0.0 <= b < c <= 1.0):
        raise ValueError(f"interval must satisfy 0 <= b < c <= 1, got ({b}, {c})")
    coeffs = state.coefficients
    gram = _energy_antiderivative(state.basis, c) - _energy_antiderivative(state.basis, b)
    return float(np.real(np.conj(coeffs) @ (gram @ coeffs)))


def write_snapshot(state: SpectralState, path) -> None:
    """Write a state as CSV rows (mode_index, re, im); 1-based indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode_index", "re", "im"])
        for k, val in enumerate(state.coefficients, start=1):
            writer.writerow([k, f"{val.real:.17g}", f"{val.imag:.17g}"])


def read_snapshot(path, basis: BasisSpec | None = None) -> SpectralState:
    """Read a snapshot CSV; basis defaults to the largest mode index present."""
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"mode_index", "re", "im"} - set(reader.fieldnames):
            raise ValueError(f"{path}: snapshot needs a header with mode_index, re, im")
        for row in reader:
            k = int(row["mode_index"])
            if k < 1:
                raise ValueError(f"{path}: mode_index must be >= 1, got {k}")
            entries[k] = complex(float(row["re"]), float(row["im"]))
    if not entries:
        raise ValueError(f"{path}: empty snapshot")
    if basis is None:
        basis = BasisSpec(max(entries))
    coeffs = np.zeros(basis.n_modes, dtype=complex)
    for k, val in entries.items():
        if k > basis.n_modes:
            raise ValueError(f"{path}: mode {k} outside basis of size {basis.n_modes}")
        coeffs[k - 1] = val
    return SpectralState(coeffs, basis)
