"""Radial kernels G_N, the Bessel function J0 and the densities theta_{N,r}.

``G_N`` is the even solution of ``s G'' + (N - 1) G' + s G = 0`` with
``G(0) = 1``; it equals cos, J0 and sinc for N = 1, 2, 3.  The power series

    G_N(s) = sum_m (-1)^m s^(2m) / (2^m m! prod_{k=1..m} (N + 2k - 2))

is summed in double-double arithmetic: the terms grow to ~1e16 near
``s = 40`` before the alternating sum settles, so plain float64 would lose
every significant digit to cancellation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AccuracyLoss, InvalidArgument, NumericFailure

SERIES_GUARD = 50.0
TERM_RTOL = 1e-16
_SPLITTER = 134217729.0  # 2**27 + 1


# -- double-double primitives -------------------------------------------------

def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + (ah * bl + al * bh))


def _dd_div_int(ah, al, d):
    q = ah / d
    p, e = _two_prod(q, d)
    return _quick_two_sum(q, (ah - p - e + al) / d)


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    return _quick_two_sum(s, e + (al + bl))


# -- G_N ----------------------------------------------------------------------

def _check_dim(N) -> int:
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise InvalidArgument(f"dimension N must be a positive integer, got {N!r}")
    return int(N)


def g_series(N: int, x):
    """Sum the Frobenius series of ``G_N`` at ``x`` (scalar or array)."""
    N = _check_dim(N)
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)):
        raise InvalidArgument("G_N needs finite arguments")
    if np.any(np.abs(xa) > SERIES_GUARD):
        raise AccuracyLoss(f"series evaluation is guarded to |x| <= {SERIES_GUARD}")
    flat = xa.ravel()
    x2h, x2l = _two_prod(flat, flat)
    x2h, x2l = -x2h, -x2l
    th, tl = np.ones_like(flat), np.zeros_like(flat)
    sh, sl = np.ones_like(flat), np.zeros_like(flat)
    m = 0
    while True:
        th, tl = _dd_mul(th, tl, x2h, x2l)
        th, tl = _dd_div_int(th, tl, 2.0 * (m + 1) * (N + 2 * m))
        sh, sl = _dd_add(sh, sl, th, tl)
        m += 1
        if np.all(np.abs(th) < TERM_RTOL * (1 + np.abs(sh))):
            break
        if m > 10_000:
            raise NumericFailure("Frobenius series failed to terminate")
    out = (sh + sl).reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def g_series_terms(N: int, x: float, count: int) -> np.ndarray:
    """First ``count`` terms ``t_0 .. t_{count-1}`` of the series at ``x``."""
    N = _check_dim(N)
    terms = np.empty(count)
    t = 1.0
    for m in range(count):
        terms[m] = t
        t *= -x * x / (2.0 * (m + 1) * (N + 2 * m))
    return terms


def g_closed(N: int, x):
    """Closed forms for N <= 3: cos, J0 and sinc."""
    N = _check_dim(N)
    xa = np.asarray(x, dtype=float)
    if N == 1:
        out = np.cos(xa)
    elif N == 2:
        out = bessel_j0(xa)
    elif N == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(xa == 0, 1.0, np.sin(xa) / np.where(xa == 0, 1.0, xa))
    else:
        raise InvalidArgument(f"no closed form for N={N}")
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def eval_g(N: int, x, method: str = "auto"):
    """``G_N(x)``: closed form for N <= 3 unless ``method='series'``."""
    N = _check_dim(N)
    if method not in ("auto", "closed", "series"):
        raise InvalidArgument(f"unknown method {method!r}")
    if method == "closed" or (method == "auto" and N <= 3):
        return g_closed(N, x)
    return g_series(N, x)


# -- J0 -----------------------------------------------------------------------

_SERIES_LIMIT = 8.0
_ASYMPTOTIC_LIMIT = 1000.0


def _j0_series(x: np.ndarray) -> np.ndarray:
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, 60):
        term = term * q / (m * m)
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.maximum(1.0, np.abs(total))):
            break
    return total


def _j0_miller(x: np.ndarray) -> np.ndarray:
    """Backward recurrence normalized by ``J0 + 2 sum J_{2k} = 1``."""
    top = int(1.2 * float(np.max(x))) + 60
    top += top % 2
    j_next = np.zeros_like(x)
    j_cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    for k in range(top, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        big = np.abs(j_cur) > 1e250
        if big.any():
            for arr in (j_next, j_cur, norm):
                arr[big] *= 1e-250
    return j_cur / (norm + j_cur)


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    # Hankel expansion; for x > 1000 a few terms are exact to rounding
    mu = 0.0
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 12):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if k % 2 == 1:
            Q = Q + term * (1 if (k // 2) % 2 == 0 else -1)
        else:
            P = P + term * (1 if (k // 2) % 2 == 0 else -1)
    phase = x - math.pi / 4
    return np.sqrt(2.0 / (math.pi * x)) * (P * np.cos(phase) - Q * np.sin(phase))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for ``|x| <= 8``, Miller's backward recurrence up to 1000 and
    the Hankel asymptotic expansion beyond.
    """
    xa = np.abs(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(xa)):
        raise InvalidArgument("bessel_j0 needs finite input")
    flat = xa.ravel()
    out = np.empty_like(flat)
    small = flat <= _SERIES_LIMIT
    large = flat > _ASYMPTOTIC_LIMIT
    mid = ~small & ~large
    if small.any():
        out[small] = _j0_series(flat[small])
    if mid.any():
        out[mid] = _j0_miller(flat[mid])
    if large.any():
        out[large] = _j0_asymptotic(flat[large])
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


# -- theta densities ----------------------------------------------------------

def theta_density(N: int, r: float, xi):
    """Density of ``theta_{N,r}`` for N = 2, 3 (zero outside ``(-r, r)``).

    For N = 2 the endpoints ``|xi| = r`` carry an integrable inverse
    square-root singularity and return ``+inf``; integrate it with the
    substitution ``xi = r sin(phi)``.
    """
    if N not in (2, 3):
        raise InvalidArgument("theta densities exist in closed form for N = 2, 3 only (N = 1 is an atom pair)")
    if not r > 0:
        raise InvalidArgument(f"support radius must be positive, got {r}")
    xa = np.asarray(xi, dtype=float)
    inside = np.abs(xa) < r
    if N == 3:
        out = np.where(inside, math.pi / r, 0.0)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            core = math.sqrt(2.0) / np.sqrt(math.pi * (r * r - xa * xa))
        out = np.where(inside, core, np.where(np.abs(xa) == r, np.inf, 0.0))
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _theta_pairing(N: int, r: float, lam: float, nodes: int) -> complex:
    """``integral theta_{N,r}(xi) exp(i lam xi) d xi`` by the rule for each N."""
    if N == 1:
        return complex(math.pi * (np.exp(-1j * lam * r) + np.exp(1j * lam * r)))
    u, w = np.polynomial.legendre.leggauss(nodes)
    if N == 3:
        xi = r * u
        return complex(np.sum(w * r * theta_density(3, r, xi) * np.exp(1j * lam * xi)))
    # xi = r sin(phi): the weight r cos(phi) cancels sqrt(r^2 - xi^2) exactly
    phi = 0.5 * math.pi * u
    xi = r * np.sin(phi)
    return complex(np.sum(0.5 * math.pi * w * math.sqrt(2.0 / math.pi) * np.exp(1j * lam * xi)))


def theta_transform(N: int, r: float, lam: float) -> complex:
    """Calibrated transform ``c_N * integral theta_{N,r} e^{i lam xi}``.

    ``c_N`` is fixed so that the value at ``lam = 0`` equals ``G_N(0) = 1``,
    which makes the comparison independent of the Fourier convention.
    """
    if N not in (1, 2, 3):
        raise InvalidArgument("theta_{N,r} is only available for N = 1, 2, 3")
    if not r > 0:
        raise InvalidArgument(f"support radius must be positive, got {r}")
    if abs(r * lam) > 40:
        raise InvalidArgument("transform checks are limited to |r lam| <= 40")
    nodes = 64 + 2 * int(math.ceil(abs(r * lam)))
    calib = _theta_pairing(N, r, 0.0, nodes).real
    coarse = _theta_pairing(N, r, lam, nodes)
    fine = _theta_pairing(N, r, lam, 2 * nodes)
    if abs(fine - coarse) > 1e-12 * max(1.0, abs(calib)):
        raise NumericFailure(f"theta quadrature did not converge: |fine - coarse| = {abs(fine - coarse):.3e}")
    return fine / calib


def theta_transform_residual(N: int, r: float, lam: float) -> float:
    """``|calibrated transform of theta_{N,r} at lam - G_N(r lam)|``."""
    return float(abs(theta_transform(N, r, lam) - eval_g(N, r * lam)))
