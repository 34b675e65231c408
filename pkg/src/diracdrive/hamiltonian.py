"""Galerkin Hamiltonian for point interactions on (0, 1).

In the sine basis the operator -d^2/dx^2 + eta * sum_j delta_{x=a_j}
truncates to H = diag(nu_k) + 2 eta sum_j s_j (x) s_j with
(s_j)_k = sin(k pi a_j).  H is real symmetric, so -iH generates unitary
dynamics.  The rank-J structure is kept explicit: applying H costs
O(N J) and the midpoint solver in `integrator` inverts I + i dt/2 H
through a J x J capacitance system instead of a dense factorization.

The eta -> infinity limit turns the points into Dirichlet walls; the
spectrum then is the union of the subinterval Dirichlet spectra, which
`split_limit_eigenvalues` provides as an independent oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from diracdrive.spectral import BasisSpec

__all__ = [
    "DiracConfig",
    "RankStructuredHamiltonian",
    "EigenDecomposition",
    "assemble",
    "apply",
    "dense",
    "eigendecompose",
    "split_limit_eigenvalues",
    "match_modes",
    "write_eigen_report",
    "DENSE_EIGEN_LIMIT",
]

DENSE_EIGEN_LIMIT = 512
DEGENERACY_GAP = 1e-8


def _validate_positions(positions) -> tuple[float, ...]:
    pos = tuple(float(a) for a in positions)
    for a in pos:
        if not 0.0 < a < 1.0:
            raise ValueError(f"Dirac position {a} must lie strictly inside (0, 1)")
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise ValueError(f"Dirac positions must be strictly increasing, got {pos}")
    return pos


@dataclass(frozen=True)
class DiracConfig:
    """Strength eta >= 0 and strictly increasing interior positions."""

    eta: float
    positions: tuple[float, ...]

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta < 0.0:
            raise ValueError(f"eta must be a finite non-negative real, got {self.eta}")
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "positions", _validate_positions(self.positions))

    @property
    def n_diracs(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class RankStructuredHamiltonian:
    """H = diag(diagonal) + 2 * strength * sum_j s_j s_j^T.

    `rank_rows` stores the coupling vectors as rows, shape (J, N).
    """

    diagonal: np.ndarray
    rank_rows: np.ndarray
    strength: float
    basis: BasisSpec

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    @property
    def n_diracs(self) -> int:
        return self.rank_rows.shape[0]


def assemble(config: DiracConfig, basis: BasisSpec) -> RankStructuredHamiltonian:
    """Assemble the diagonal-plus-rank-J operator for a Dirac configuration."""
    nu = basis.laplacian_eigenvalues
    rows = np.sin(np.multiply.outer(np.asarray(config.positions), basis.wavenumbers))
    rows = rows.reshape(config.n_diracs, basis.n_modes)
    nu.setflags(write=False)
    rows.setflags(write=False)
    return RankStructuredHamiltonian(nu, rows, config.eta, basis)


def apply(hamiltonian: RankStructuredHamiltonian, vector) -> np.ndarray:
    """Matrix-vector product H v in O(N J) without materializing H."""
    v = np.asarray(vector)
    if v.shape != (hamiltonian.n_modes,):
        raise ValueError(
            f"vector of shape {v.shape} does not match basis size {hamiltonian.n_modes}"
        )
    out = hamiltonian.diagonal * v
    if hamiltonian.n_diracs and hamiltonian.strength != 0.0:
        rows = hamiltonian.rank_rows
        out = out + (2.0 * hamiltonian.strength) * (rows.T @ (rows @ v))
    return out


def dense(hamiltonian: RankStructuredHamiltonian) -> np.ndarray:
    """Dense N x N materialization (diagnostics and small oracles only)."""
    mat = np.diag(hamiltonian.diagonal).astype(float)
    if hamiltonian.n_diracs and hamiltonian.strength != 0.0:
        rows = hamiltonian.rank_rows
        mat += (2.0 * hamiltonian.strength) * (rows.T @ rows)
    return mat


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns.

    Signs are fixed so each column's largest-magnitude entry is positive;
    adjacent eigenvalue gaps below DEGENERACY_GAP are listed (0-based) in
    `degenerate_pairs`.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    degenerate_pairs: tuple[tuple[int, int], ...] = ()


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    lead = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def eigendecompose(
    hamiltonian: RankStructuredHamiltonian,
    dense_limit: int = DENSE_EIGEN_LIMIT,
    degeneracy_gap: float = DEGENERACY_GAP,
) -> EigenDecomposition:
    """Full symmetric eigendecomposition of the dense materialization."""
    n = hamiltonian.n_modes
    if n > dense_limit:
        raise ValueError(
            f"dense eigendecomposition is limited to N <= {dense_limit} (got N={n}); "
            "compute a partial decomposition with an iterative solver instead"
        )
    values, vectors = scipy.linalg.eigh(dense(hamiltonian))
    vectors = _fix_signs(vectors)
    gaps = np.diff(values)
    pairs = tuple((int(i), int(i + 1)) for i in np.nonzero(gaps < degeneracy_gap)[0])
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenDecomposition(values, vectors, pairs)


def split_limit_eigenvalues(positions, count: int) -> np.ndarray:
    """Smallest `count` Dirichlet eigenvalues of the split domain.

    The points act as hard walls; candidate values are m^2 pi^2 / l_i^2
    over every subinterval length l_i, sorted ascending with ties kept.
    """
    pos = _validate_positions(positions)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    edges = np.concatenate(([0.0], np.asarray(pos), [1.0]))
    lengths = np.diff(edges)
    m = np.arange(1, count + 1)
    candidates = np.concatenate([(m * np.pi / length) ** 2 for length in lengths])
    candidates.sort()
    return candidates[:count]


def match_modes(reference: np.ndarray, candidates: np.ndarray):
    """Match candidate eigenvector columns to reference columns by overlap.

    Returns (perm, overlaps): candidates[:, perm[i]] is the best global
    match for reference[:, i], maximizing total |<ref_i, cand_j>| by
    assignment.  Overlaps below ~1/sqrt(2) signal ambiguous tracking.
    """
    overlap = np.abs(reference.T @ candidates)
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(reference.shape[1], dtype=int)
    perm[rows] = cols
    return perm, overlap[rows, cols]


def write_eigen_report(path, times, decompositions, n_values: int | None = None,
                       participation_modes: int = 5) -> None:
    """CSV report: (time, k, lambda_k, participation).

    Participation is the squared weight of eigenvector k on the first
    `participation_modes` sine modes.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "k", "lambda_k", "participation"])
        for t, dec in zip(times, decompositions):
            count = len(dec.eigenvalues) if n_values is None else min(n_values, len(dec.eigenvalues))
            head = dec.eigenvectors[:participation_modes, :count]
            participation = np.sum(head**2, axis=0)
            for k in range(count):
                writer.writerow(
                    [f"{t:.17g}", k + 1, f"{dec.eigenvalues[k]:.17g}", f"{participation[k]:.17g}"]
                )
