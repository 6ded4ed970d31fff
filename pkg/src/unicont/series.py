"""Finite truncations of almost-periodic eigenfunction series.

``u(t, x) = sum_n a_n S_n(x) exp(i lambda_n t)`` and the two-sided form
``sum_n (a_n exp(-i lambda_n t) + b_n exp(i lambda_n t)) S_n(x)``.  Mode sums
run in ascending ``n`` with Kahan compensation, so results are deterministic
and insensitive to the length of the truncation.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy
from scipy import integrate

from .domains import as_points
from .eigenbasis import SpectralBasis
from .errors import InvalidArgument


def kahan_sum(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over the last axis, in index order."""
    terms = np.asarray(terms)
    total = np.zeros(terms.shape[:-1], dtype=terms.dtype)
    comp = np.zeros_like(total)
    for k in range(terms.shape[-1]):
        y = terms[..., k] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    """Complex coefficients ``a_0 .. a_{K-1}`` with a claimed growth exponent ``q``."""

    values: np.ndarray
    q: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).ravel()
        if vals.size == 0:
            raise InvalidArgument("coefficient sequence is empty")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("coefficients must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


def _coeffs(c) -> CoefficientSequence:
    return c if isinstance(c, CoefficientSequence) else CoefficientSequence(c)


@dataclass(frozen=True, eq=False)
class APSeries:
    """Series over ``basis``: one-sided when ``b`` is None, two-sided otherwise."""

    basis: SpectralBasis
    a: CoefficientSequence
    b: CoefficientSequence | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _coeffs(self.a))
        if self.b is not None:
            object.__setattr__(self, "b", _coeffs(self.b))
            if len(self.b) != len(self.a):
                raise InvalidArgument(f"a has {len(self.a)} coefficients but b has {len(self.b)}")
        self.basis.check_size(len(self.a))

    @property
    def K(self) -> int:
        return len(self.a)


def _mode_values(basis: SpectralBasis, x, K: int) -> tuple[np.ndarray, bool]:
    pts, single = as_points(x, basis.dim)
    inside = np.atleast_1d(basis.domain.contains(pts if basis.dim > 1 else pts[:, 0]))
    if not np.all(inside):
        raise InvalidArgument(f"evaluation point outside the domain: {pts[~inside][0].tolist()}")
    return basis.values(pts, K), single


def ap_eval(series: APSeries, t, x):
    """Evaluate the series at time(s) ``t`` and point(s) ``x``.

    Scalar ``t`` with a single point gives a complex number; arrays of times
    and points give an array of shape ``(n_t, n_x)`` (dropping absent axes).
    A two-sided series is evaluated in its two-sided form.
    """
    if series.b is not None:
        return ap_eval_two_sided(series.basis, series.a, series.b, t, x)
    K = series.K
    S, single = _mode_values(series.basis, x, K)
    tt = np.asarray(t, dtype=float)
    coef = series.a.values * np.exp(1j * np.multiply.outer(tt, series.basis.lambdas(K)))
    return _contract(coef, S, single, tt.ndim == 0)


def ap_eval_two_sided(basis: SpectralBasis, a, b, t, x):
    """``sum_n (a_n exp(-i lambda_n t) + b_n exp(i lambda_n t)) S_n(x)``."""
    a, b = _coeffs(a), _coeffs(b)
    if len(a) != len(b):
        raise InvalidArgument(f"a has {len(a)} coefficients but b has {len(b)}")
    K = len(a)
    basis.check_size(K)
    S, single = _mode_values(basis, x, K)
    tt = np.asarray(t, dtype=float)
    ph = np.multiply.outer(tt, basis.lambdas(K))
    coef = a.values * np.exp(-1j * ph) + b.values * np.exp(1j * ph)
    return _contract(coef, S, single, tt.ndim == 0)


def _contract(coef: np.ndarray, S: np.ndarray, single: bool, scalar_t: bool):
    """Sum ``coef[..., n] * S[j, n]`` over modes with compensated summation."""
    if scalar_t:
        out = kahan_sum(coef * S)
        return complex(out[0]) if single else out
    if single:
        return kahan_sum(coef * S[0])
    return kahan_sum(coef[:, None, :] * S[None, :, :])


# -- pairing with test functions ----------------------------------------------

@dataclass(frozen=True, eq=False)
class CompactTestFunction:
    """Smooth function supported in ``support`` with its derivatives.

    ``derivative(k)`` returns a vectorized callable for the k-th derivative,
    zero outside the support.
    """

    support: tuple[float, float]
    _derivs: Callable[[int], Callable]

    def derivative(self, k: int) -> Callable:
        return self._derivs(k)

    def __call__(self, xi):
        return self.derivative(0)(xi)


def bump(T0: float) -> CompactTestFunction:
    """``exp(-1 / (1 - (xi/T0)^2))`` on ``(-T0, T0)`` with exact derivatives."""
    if not T0 > 0:
        raise InvalidArgument("bump half-width must be positive")
    xi = sympy.Symbol("xi", real=True)
    expr = sympy.exp(-1 / (1 - (xi / T0) ** 2))
    cache: dict[int, Callable] = {}

    def derivs(k: int) -> Callable:
        if k not in cache:
            raw = sympy.lambdify(xi, sympy.diff(expr, xi, k), "numpy")

            def f(v, raw=raw):
                v = np.asarray(v, dtype=float)
                inside = np.abs(v) < T0
                out = np.zeros_like(v)
                if np.any(inside):
                    out[inside] = raw(v[inside]) if v.ndim else raw(float(v))
                return out if v.ndim else float(out)
            cache[k] = f
        return cache[k]

    return CompactTestFunction((-T0, T0), derivs)


def min_parts_order(q: int, N: int) -> int:
    """Smallest admissible number of integrations by parts, ``2 + q N``."""
    return 2 + q * N


def _oscillatory_integral(f: Callable, lo: float, hi: float, lam: float, sign: int) -> complex:
    """``integral_lo^hi f(xi) exp(sign * i lam xi) d xi`` by adaptive QUADPACK rules."""
    opts = dict(limit=200, epsabs=1e-14, epsrel=1e-13)
    with warnings.catch_warnings():
        # tolerances sit at the rounding floor; QUADPACK reports that, harmlessly
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if lam == 0:
            return complex(integrate.quad(f, lo, hi, **opts)[0])
        c = integrate.quad(f, lo, hi, weight="cos", wvar=lam, **opts)[0]
        s = integrate.quad(f, lo, hi, weight="sin", wvar=lam, **opts)[0]
    return complex(c, sign * s)


def _check_support(phi: CompactTestFunction) -> None:
    lo, hi = phi.support
    if not lo < hi:
        raise InvalidArgument("test function support must be a nonempty interval")
    width = hi - lo
    outside = np.array([lo - 0.5 * width, lo - 1e-9 * width, hi + 1e-9 * width, hi + 0.5 * width])
    if np.any(np.abs(phi(outside)) > 0):
        raise InvalidArgument(f"test function does not vanish outside its declared support {phi.support}")


def ap_eval_tested(series: APSeries, phi: CompactTestFunction, p: int, x) -> complex:
    """Pairing ``(u(., x), phi)`` after moving ``p`` time derivatives onto ``phi``.

    Each mode contributes ``a_n (-1)^p S_n(x) / (i lambda_n)^p`` times
    ``integral phi^(p)(xi) exp(i lambda_n xi)``; the b-modes of a two-sided
    series use ``-lambda_n``.
    """
    if p < 0 or int(p) != p:
        raise InvalidArgument("the parts order p must be a non-negative integer")
    _check_support(phi)
    lo, hi = phi.support
    K = series.K
    S, _ = _mode_values(series.basis, x, K)
    dp = phi.derivative(p)
    terms = []
    branches = [(series.a.values, +1 if series.b is None else -1)]
    if series.b is not None:
        branches.append((series.b.values, +1))
    for coeffs, sign in branches:
        for n, lam in enumerate(series.basis.lambdas(K)):
            if coeffs[n] == 0:
                terms.append(0j)
                continue
            ilam = 1j * sign * lam
            integral = _oscillatory_integral(dp, lo, hi, lam, sign)
            terms.append(coeffs[n] * (-1) ** p * S[0, n] / ilam**p * integral)
    return complex(kahan_sum(np.array(terms)))


def pair_direct(series: APSeries, phi: CompactTestFunction, x) -> complex:
    """``integral u(xi, x) phi(xi) d xi`` by adaptive quadrature in time."""
    lo, hi = phi.support
    pts, _ = as_points(x, series.basis.dim)
    x0 = pts[0] if series.basis.dim > 1 else pts[0, 0]
    re, _ = integrate.quad(lambda s: (ap_eval(series, s, x0) * phi(s)).real, lo, hi, limit=400,
                           epsabs=1e-14, epsrel=1e-12)
    im, _ = integrate.quad(lambda s: (ap_eval(series, s, x0) * phi(s)).imag, lo, hi, limit=400,
                           epsabs=1e-14, epsrel=1e-12)
    return complex(re, im)


# -- growth -------------------------------------------------------------------

def sprime_growth_check(coeffs: CoefficientSequence, rtol: float = 1e-6) -> bool:
    """Finite-sample surrogate for ``(n^-q a_n)`` being summable.

    Indices start at ``n = 1``.  The partial sums of ``n^-q |a_n|`` must grow
    by at most ``rtol`` of the total over the last quarter of the truncation.
    """
    coeffs = _coeffs(coeffs)
    n = np.arange(1, len(coeffs) + 1, dtype=float)
    w = np.abs(coeffs.values) * n ** (-float(coeffs.q))
    partial = np.cumsum(w)
    total = partial[-1]
    if total == 0:
        return True
    start = (3 * len(coeffs)) // 4
    before = partial[start - 1] if start > 0 else 0.0
    return bool(total - before <= rtol * total)


# -- files --------------------------------------------------------------------

def read_coefficients(path) -> tuple[CoefficientSequence, CoefficientSequence | None]:
    """Read ``n, re(a), im(a)[, re(b), im(b)]`` rows (header optional)."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise InvalidArgument(f"{path}: non-numeric row {rec}")
                continue  # header
    if not rows:
        raise InvalidArgument(f"{path}: no coefficient rows")
    width = {len(r) for r in rows}
    if width not in ({3}, {5}):
        raise InvalidArgument(f"{path}: rows must have 3 or 5 columns")
    arr = np.array(rows)
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    a = CoefficientSequence(arr[:, 1] + 1j * arr[:, 2])
    b = CoefficientSequence(arr[:, 3] + 1j * arr[:, 4]) if arr.shape[1] == 5 else None
    return a, b


def write_coefficients(path, a, b=None) -> None:
    a = _coeffs(a)
    header = ["n", "re_a", "im_a"] + (["re_b", "im_b"] if b is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n in range(len(a)):
            row = [n, f"{a.values[n].real:.17g}", f"{a.values[n].imag:.17g}"]
            if b is not None:
                bv = _coeffs(b).values[n]
                row += [f"{bv.real:.17g}", f"{bv.imag:.17g}"]
            w.writerow(row)
