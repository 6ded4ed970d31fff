"""Spectral solutions of the Dirichlet wave equation and source recovery.

Initial-value problem: ``w_tt = Delta w`` with ``w(0) = sum (A_n / lambda_n) S_n``
and ``w_t(0) = sum B_n S_n``.  Forced problem: ``w_tt = Delta w + g(t) f(x)``
from rest, with ``f = sum C_n lambda_n S_n``; its modal amplitudes are
``C_n int_0^t g(t - tau) sin(lambda_n tau) d tau``.  Differentiating the
observation ``y = w`` in time gives the Volterra equation of the second kind

    g(0) z(t) + int_0^t g'(t - tau) z(tau) d tau = y'(t),

whose solution ``z = sum C_n sin(lambda_n t) S_n`` determines ``C``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .eigenbasis import SpectralBasis
from .errors import InvalidArgument, NumericFailure
from .series import CoefficientSequence, _contract, _mode_values

COND_LIMIT = 1e12


class RankDeficiencyWarning(UserWarning):
    """The least-squares fit was truncated because of ill-conditioning."""


# -- time profiles ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GProfile:
    """Named time profile ``g`` with its derivative."""

    name: str
    params: dict
    g: Callable
    dg: Callable

    def __call__(self, t):
        return self.g(np.asarray(t, dtype=float))

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def g_profile(name: str, **params) -> GProfile:
    """Build a profile by name.

    ``const`` (c), ``affine`` (c0 + c1 t), ``exp`` (c exp(k t)) and
    ``cosine`` (c cos(w t)).  Missing parameters default to ``c = c0 = 1``,
    ``c1 = 0.5``, ``k = 1`` and ``w = 1``.
    """
    p = {k: float(v) for k, v in params.items()}
    if name == "const":
        c = p.setdefault("c", 1.0)
        g, dg = (lambda t: np.full_like(t, c)), (lambda t: np.zeros_like(t))
    elif name == "affine":
        c0, c1 = p.setdefault("c0", 1.0), p.setdefault("c1", 0.5)
        g, dg = (lambda t: c0 + c1 * t), (lambda t: np.full_like(t, c1))
    elif name == "exp":
        c, k = p.setdefault("c", 1.0), p.setdefault("k", 1.0)
        g, dg = (lambda t: c * np.exp(k * t)), (lambda t: c * k * np.exp(k * t))
    elif name == "cosine":
        c, w = p.setdefault("c", 1.0), p.setdefault("w", 1.0)
        g, dg = (lambda t: c * np.cos(w * t)), (lambda t: -c * w * np.sin(w * t))
    else:
        raise InvalidArgument(f"unknown g profile {name!r}; expected const, affine, exp or cosine")
    return GProfile(name, p, g, dg)


# -- data ---------------------------------------------------------------------

def _real_sequence(values, label: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{label} must be a nonempty finite real sequence")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class InitialData:
    """Coefficients ``A`` (of ``lambda_n``-scaled displacement) and ``B`` (velocity)."""

    basis: SpectralBasis
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A, B = _real_sequence(self.A, "A"), _real_sequence(self.B, "B")
        if A.size != B.size:
            raise InvalidArgument(f"A has {A.size} entries but B has {B.size}")
        self.basis.check_size(A.size)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def K(self) -> int:
        return self.A.size

    @property
    def lambdas(self) -> np.ndarray:
        return self.basis.lambdas(self.K)


@dataclass(frozen=True, eq=False)
class SourceData:
    """Separable source ``g(t) f(x)`` with ``f = sum C_n lambda_n S_n``."""

    basis: SpectralBasis
    C: np.ndarray
    g: GProfile

    def __post_init__(self):
        C = _real_sequence(self.C, "C")
        self.basis.check_size(C.size)
        object.__setattr__(self, "C", C)
        if float(self.g(0.0)) == 0.0:
            raise InvalidArgument("the time profile must satisfy g(0) != 0")

    @property
    def K(self) -> int:
        return self.C.size

    @property
    def lambdas(self) -> np.ndarray:
        return self.basis.lambdas(self.K)


# -- initial-value problem ----------------------------------------------------

def wave_coeffs_from_initial(data: InitialData, lambda_free: bool = False
                             ) -> tuple[CoefficientSequence, CoefficientSequence]:
    """``a_n = (A_n + i B_n) / (2 lambda_n)`` and ``b_n = (A_n - i B_n) / (2 lambda_n)``.

    With ``lambda_free`` the factor ``1 / lambda_n`` is dropped, which is the
    coefficient map for data one derivative rougher.
    """
    scale = 2.0 if lambda_free else 2.0 * data.lambdas
    a = (data.A + 1j * data.B) / scale
    b = (data.A - 1j * data.B) / scale
    return CoefficientSequence(a), CoefficientSequence(b)


def initial_from_coeffs(basis: SpectralBasis, a, b, lambda_free: bool = False) -> InitialData:
    """Inverse of :func:`wave_coeffs_from_initial`."""
    a = a.values if isinstance(a, CoefficientSequence) else np.asarray(a, dtype=complex)
    b = b.values if isinstance(b, CoefficientSequence) else np.asarray(b, dtype=complex)
    if a.size != b.size:
        raise InvalidArgument(f"a has {a.size} coefficients but b has {b.size}")
    lam = 1.0 if lambda_free else basis.lambdas(a.size)
    return InitialData(basis, (lam * (a + b)).real, (-1j * lam * (a - b)).real)


def ivp_modal(data: InitialData, t) -> tuple[np.ndarray, np.ndarray]:
    """Modal displacement and velocity at times ``t``; shapes ``t.shape + (K,)``."""
    lam = data.lambdas
    ph = np.multiply.outer(np.asarray(t, dtype=float), lam)
    c, s = np.cos(ph), np.sin(ph)
    return (data.A * c + data.B * s) / lam, data.B * c - data.A * s


def wave_eval_ivp(data: InitialData, t, x):
    """``sum (1/lambda_n) [A_n cos(lambda_n t) + B_n sin(lambda_n t)] S_n(x)``."""
    S, single = _mode_values(data.basis, x, data.K)
    tt = np.asarray(t, dtype=float)
    disp, _ = ivp_modal(data, tt)
    return _contract(disp, S, single, tt.ndim == 0).real


def wave_energy(data: InitialData, t: float, order: int = 64) -> float:
    """``(||w_t||^2 + ||grad w||^2) / 2`` at time ``t`` by domain quadrature."""
    pts, w = data.basis.domain.quadrature(order)
    disp, vel = ivp_modal(data, float(t))
    S = data.basis.values(pts, data.K)
    wt = S @ vel
    grads = [p.gradient for p in data.basis.pairs[:data.K]]
    if any(g is None for g in grads):
        raise InvalidArgument("energy needs eigenfunction gradients, which this basis lacks")
    G = np.stack([g(pts) for g in grads], axis=-1)  # (m, dim, K)
    gw = G @ disp
    return 0.5 * float(np.sum(w * wt**2) + np.sum(w[:, None] * gw**2))


def parseval_energy(data: InitialData) -> float:
    return 0.5 * float(np.sum(data.A**2 + data.B**2))


def leapfrog_modal(lam, w0, v0, t_end: float, dt: float, forcing: Callable | None = None) -> np.ndarray:
    """Stormer-Verlet integration of ``w'' + lam^2 w = F(t)`` for every mode.

    ``forcing(t)`` returns the modal forcing vector.  The step is shrunk so
    that it divides ``t_end``; returns the modal displacement at ``t_end``.
    """
    lam = np.asarray(lam, dtype=float)
    if t_end < 0:
        raise InvalidArgument("t_end must be non-negative")
    steps = max(1, int(math.ceil(t_end / dt)))
    h = t_end / steps
    F = forcing if forcing is not None else (lambda s: 0.0)
    w = np.array(w0, dtype=float)
    v = np.array(v0, dtype=float)
    acc = F(0.0) - lam**2 * w
    for k in range(steps):
        v_half = v + 0.5 * h * acc
        w = w + h * v_half
        acc = F((k + 1) * h) - lam**2 * w
        v = v_half + 0.5 * h * acc
    return w


# -- forced problem -----------------------------------------------------------

def forced_modal(src: SourceData, t) -> np.ndarray:
    """Modal amplitudes ``C_n int_0^t g(t - tau) sin(lambda_n tau) d tau``.

    All times are integrated in one adaptive vector quadrature after the
    substitution ``tau = t s``.  Returns shape ``t.shape + (K,)``.
    """
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise InvalidArgument("the forced solution is defined for t >= 0")
    flat = tt.ravel()
    lam = src.lambdas

    def integrand(s):
        tau = flat * s
        return (flat * src.g(flat - tau))[:, None] * np.sin(np.multiply.outer(tau, lam))

    val, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, norm="max", limit=2000)
    if not np.isfinite(err) or err > 1e-8 * max(1.0, float(np.max(np.abs(val)))):
        raise NumericFailure(f"Duhamel quadrature error estimate {err:.3e} is too large")
    return (src.C * val).reshape(tt.shape + (src.K,))


def wave_eval_forced(src: SourceData, t, x):
    """Forced solution from rest at time(s) ``t`` and point(s) ``x``."""
    tt = np.asarray(t, dtype=float)
    modal = forced_modal(src, tt)
    S, single = _mode_values(src.basis, x, src.K)
    return _contract(modal, S, single, tt.ndim == 0).real


def forced_leapfrog(src: SourceData, t_end: float, dt: float) -> np.ndarray:
    """Time-stepping oracle for the forced modal amplitudes at ``t_end``."""
    lam = src.lambdas
    z = np.zeros(src.K)
    return leapfrog_modal(lam, z, z, t_end, dt, lambda s: float(src.g(s)) * src.C * lam)


# -- Volterra reduction -------------------------------------------------------

def volterra_solve(g0: float, gprime: Callable, y=None, dt: float = None, dy=None) -> np.ndarray:
    """Solve ``g0 z(t) + int_0^t g'(t - tau) z(tau) d tau = y'(t)`` on ``t_k = k dt``.

    Pass either samples ``y`` (first axis time, ``y[0] = 0``; differentiated
    with second-order finite differences) or the derivative ``dy`` directly.
    The integral uses the trapezoidal rule, so the scheme is second order.
    """
    if g0 == 0:
        raise InvalidArgument("the Volterra equation needs g(0) != 0")
    if dt is None or not dt > 0:
        raise InvalidArgument("a positive time step dt is required")
    if dy is None:
        if y is None:
            raise InvalidArgument("give the observation y or its derivative dy")
        y = np.asarray(y, dtype=float)
        if y.shape[0] < 3:
            raise InvalidArgument("need at least three time samples")
        if np.any(np.abs(y[0]) > 1e-12 * max(1.0, float(np.max(np.abs(y))))):
            raise InvalidArgument("observations must start from rest: y(0) = 0")
        dy = np.gradient(y, dt, axis=0, edge_order=2)
    dy = np.asarray(dy, dtype=float)
    M = dy.shape[0]
    kern = np.asarray(gprime(dt * np.arange(M)), dtype=float)
    z = np.empty_like(dy)
    z[0] = dy[0] / g0
    diag = g0 + 0.5 * dt * kern[0]
    if diag == 0:
        raise NumericFailure("trapezoidal Volterra step is singular; reduce dt")
    for k in range(1, M):
        hist = 0.5 * kern[k] * z[0]
        if k > 1:
            hist = hist + np.tensordot(kern[k - 1:0:-1], z[1:k], axes=(0, 0))
        z[k] = (dy[k] - dt * hist) / diag
    return z


@dataclass(frozen=True, eq=False)
class Recovery:
    """Estimated ``C`` with fit residual, effective rank and condition number."""

    C: np.ndarray
    residual: float
    rank: int
    cond: float


def _truncated_lstsq(D: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, int, float]:
    U, s, Vh = np.linalg.svd(D, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(D.shape[1]), 0, math.inf
    cond = s[0] / s[-1] if s[-1] > 0 else math.inf
    keep = s >= s[0] / COND_LIMIT
    if cond > COND_LIMIT:
        warnings.warn(f"fit condition number {cond:.3e} exceeds {COND_LIMIT:.0e}; "
                      f"keeping {int(keep.sum())} of {s.size} directions", RankDeficiencyWarning, stacklevel=3)
    coef = Vh[keep].T @ ((U[:, keep].T @ rhs) / s[keep])
    return coef, int(keep.sum()), cond


def source_recover(obs, g: GProfile, basis: SpectralBasis, K: int, dt: float,
                   points=None) -> Recovery:
    """Estimate ``C`` from observations of the forced solution on ``t_k = k dt``.

    ``obs`` has time along the first axis.  With ``points`` it holds pointwise
    samples ``w(t_k, x_j)``; without, it holds the first ``K`` modal amplitudes.
    """
    basis.check_size(K)
    g0 = float(g(0.0))
    obs = np.asarray(obs, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if points is None:
        if obs.shape[1] != K:
            raise InvalidArgument(f"modal observations need {K} columns, got {obs.shape[1]}")
        space = np.eye(K)
    else:
        space, _ = _mode_values(basis, points, K)
        if obs.shape[1] != space.shape[0]:
            raise InvalidArgument(f"{space.shape[0]} points but {obs.shape[1]} observation columns")
    if not np.any(obs):
        return Recovery(np.zeros(K), 0.0, 0, 1.0)
    z = volterra_solve(g0, g.dg, obs, dt)
    t = dt * np.arange(obs.shape[0])
    temporal = np.sin(np.multiply.outer(t, basis.lambdas(K)))  # (M, K)
    D = (temporal[:, None, :] * space[None, :, :]).reshape(-1, K)
    rhs = z.reshape(-1)
    C, rank, cond = _truncated_lstsq(D, rhs)
    residual = float(np.linalg.norm(D @ C - rhs))
    return Recovery(C, residual, rank, cond)
