"""Finite observation operators on omega x (-T, T) and their conditioning.

The two-sided series ``sum (a_n exp(-i lambda_n t) + b_n exp(i lambda_n t)) S_n(x)``
sampled at ``(t_i, x_j)`` is a complex matrix acting on the stacked vector
``(a_0 .. a_{K-1}, b_0 .. b_{K-1})``.  A positive smallest singular value means
zero data forces zero coefficients at this truncation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .domains import Lattice, Region
from .eigenbasis import SpectralBasis
from .errors import InvalidArgument, NumericFailure, TotalRankLoss


class UnderdeterminedWarning(UserWarning):
    """Fewer samples than unknown coefficients."""


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Spatial samples in omega and times in ``(-T, T)``.

    Rows of the observation operator run over times first, then points:
    row ``i * n_x + j`` samples ``(times[i], points[j])``.
    """

    points: np.ndarray
    times: np.ndarray
    T: float
    omega: dict = field(default_factory=dict)
    underdetermined: bool = False

    @property
    def n_x(self) -> int:
        return len(self.points)

    @property
    def n_t(self) -> int:
        return len(self.times)

    @property
    def rows(self) -> int:
        return self.n_x * self.n_t


def _omega_points(omega, n_x: int) -> tuple[np.ndarray, dict]:
    if isinstance(omega, Region):
        return omega.sample(n_x), omega.describe()
    if isinstance(omega, tuple) and len(omega) == 2 and isinstance(omega[0], Lattice):
        lattice, mask = omega
        mask = np.asarray(mask, dtype=bool) & lattice.interior
        nodes = np.argwhere(mask)
        if len(nodes) == 0:
            raise InvalidArgument("omega mask selects no interior node")
        pick = np.unique(np.linspace(0, len(nodes) - 1, n_x).round().astype(int))
        return lattice.node_coords(nodes[pick]), {"kind": "mask", "nodes": int(mask.sum())}
    raise InvalidArgument("omega must be a Region or a (Lattice, mask) pair")


def build_sampling_grid(omega, T: float, n_x: int, n_t: int, K: int | None = None) -> SamplingGrid:
    """``n_x`` quasi-uniform points of omega and ``n_t`` midpoint times in ``(-T, T)``.

    When ``K`` is given and ``n_x * n_t < 2K`` the grid is flagged (and a
    warning issued) as under-determined.
    """
    if not T > 0:
        raise InvalidArgument(f"time horizon must be positive, got {T}")
    if n_x < 1 or n_t < 1:
        raise InvalidArgument("sample counts must be positive")
    points, desc = _omega_points(omega, n_x)
    times = -T + (np.arange(n_t) + 0.5) * (2 * T / n_t)
    under = K is not None and len(points) * n_t < 2 * K
    if under:
        warnings.warn(f"{len(points) * n_t} samples for {2 * K} unknowns", UnderdeterminedWarning, stacklevel=2)
    return SamplingGrid(points, times, float(T), desc, under)


@dataclass(frozen=True, eq=False)
class ObservationOperator:
    """Sampling matrix with its SVD; ``sigma_min`` is normalized by ``sqrt(rows)``."""

    matrix: np.ndarray
    K: int
    grid: SamplingGrid
    U: np.ndarray = field(repr=False)
    singular_values: np.ndarray
    Vh: np.ndarray = field(repr=False)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1]) / math.sqrt(self.rows)

    @property
    def sigma_min_raw(self) -> float:
        return float(self.singular_values[-1])

    @property
    def cond(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    def apply(self, a, b) -> np.ndarray:
        return self.matrix @ np.concatenate([np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)])


def observation_matrix(basis: SpectralBasis, grid: SamplingGrid, K: int) -> np.ndarray:
    basis.check_size(K)
    S = basis.values(grid.points, K)  # (n_x, K)
    ph = np.exp(-1j * np.multiply.outer(grid.times, basis.lambdas(K)))  # (n_t, K)
    A = ph[:, None, :] * S[None, :, :]
    B = np.conj(ph)[:, None, :] * S[None, :, :]
    return np.concatenate([A, B], axis=2).reshape(grid.rows, 2 * K)


def build_observation_operator(basis: SpectralBasis, grid: SamplingGrid, K: int) -> ObservationOperator:
    if grid.rows < 2 * K:
        warnings.warn(f"{grid.rows} samples for {2 * K} unknowns", UnderdeterminedWarning, stacklevel=2)
    M = observation_matrix(basis, grid, K)
    try:
        U, s, Vh = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD of the {M.shape} observation matrix failed: {exc}") from exc
    if s.size < 2 * K:
        s = np.concatenate([s, np.zeros(2 * K - s.size)])
    return ObservationOperator(M, K, grid, U, s, Vh)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    a: np.ndarray
    b: np.ndarray
    residual: float
    rank: int

    @property
    def coeffs(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])


def reconstruct_coeffs(op: ObservationOperator, data, svd_cutoff: float = 1e-12) -> Reconstruction:
    """Truncated-SVD least squares, dropping ``sigma < svd_cutoff * sigma_max``."""
    data = np.asarray(data, dtype=complex).ravel()
    if data.size != op.rows:
        raise InvalidArgument(f"data has {data.size} entries, operator has {op.rows} rows")
    s = op.singular_values[: len(op.U[0])]
    keep = s >= svd_cutoff * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    if not keep.any():
        raise TotalRankLoss("every singular value is below the cutoff")
    c = op.Vh[keep].conj().T @ ((op.U[:, keep].conj().T @ data) / s[keep])
    residual = float(np.linalg.norm(op.matrix @ c - data))
    return Reconstruction(c[: op.K], c[op.K:], residual, int(keep.sum()))


@dataclass(frozen=True)
class SweepRow:
    T: float
    sigma_min: float
    cond: float
    rows: int


def sigma_min_sweep(basis: SpectralBasis, omega, Ts, K: int, n_x: int, density: float) -> list[SweepRow]:
    """Normalized ``sigma_min`` and condition number for each horizon in ``Ts``.

    ``density`` is the number of time samples per unit time, so the row count
    grows with ``T``; ``n_x`` spatial samples are used throughout.
    """
    Ts = [float(T) for T in Ts]
    if any(b < a for a, b in zip(Ts, Ts[1:])):
        raise InvalidArgument("horizons must be non-decreasing")
    if not density > 0:
        raise InvalidArgument("time sampling density must be positive")
    out = []
    for T in Ts:
        n_t = max(1, int(math.ceil(2 * T * density)))
        op = build_observation_operator(basis, build_sampling_grid(omega, T, n_x, n_t), K)
        out.append(SweepRow(T, op.sigma_min, op.cond, op.rows))
    return out
