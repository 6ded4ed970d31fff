"""Deterministic property suite behind the ``verify`` experiment.

Every check is a named scalar compared with a threshold.  Random draws come
from a single seeded generator, so a fixed seed gives identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .domains import Domain, Region, l_shape
from .eigenbasis import build_interval_basis, build_rectangle_basis, weyl_fit
from .errors import InvalidArgument
from .geometry import compute_t_max, geodesic_distance
from .kernels import bessel_j0, g_closed, g_series, theta_transform_residual
from .means import (factorization_residual, mean_ode_residual, mean_profile, sample_mean_triples,
                    sphere_quadrature)
from .series import ap_eval_two_sided
from .ucp import build_observation_operator, build_sampling_grid, reconstruct_coeffs
from .wave import (InitialData, SourceData, forced_leapfrog, forced_modal, g_profile, ivp_modal, leapfrog_modal,
                   parseval_energy, source_recover, wave_coeffs_from_initial, wave_energy,
                   wave_eval_forced, wave_eval_ivp)


@dataclass(frozen=True)
class Check:
    """``passed`` is ``value <= threshold`` unless ``mode`` is ``">"``."""

    name: str
    value: float
    threshold: float
    mode: str = "<="

    @property
    def passed(self) -> bool:
        if self.mode == ">":
            return bool(self.value > self.threshold)
        return bool(self.value <= self.threshold)


def _rel(est, ref) -> float:
    return float(np.linalg.norm(np.asarray(est) - np.asarray(ref)) / np.linalg.norm(ref))


def check_kernels(rng) -> Iterator[Check]:
    x = np.linspace(0.0, 40.0, 401)
    for N in (1, 2, 3):
        yield Check(f"kernel_series_N{N}", float(np.max(np.abs(g_series(N, x) - g_closed(N, x)))), 1e-10)
    xs = np.linspace(0.0, 30.0, 100)
    # (1/pi) int_0^pi cos(x sin t) dt with a 200-point Gauss rule, exact to rounding for x <= 30
    u, w = np.polynomial.legendre.leggauss(200)
    t = 0.5 * math.pi * (u + 1)
    oracle = 0.5 * np.cos(np.multiply.outer(xs, np.sin(t))) @ w
    yield Check("bessel_j0_integral", float(np.max(np.abs(bessel_j0(xs) - oracle))), 1e-10)
    for N, tol in ((3, 1e-8), (2, 1e-7)):
        worst = max(theta_transform_residual(N, r, lam)
                    for r in (0.5, 1.0, 2.0) for lam in np.linspace(-20 / r, 20 / r, 41))
        yield Check(f"theta_transform_N{N}", worst, tol)


def check_means(rng) -> Iterator[Check]:
    bases = {"interval": build_interval_basis(math.pi, 10), "rectangle": build_rectangle_basis(math.pi, math.pi, 10)}
    for name, basis in bases.items():
        quad = sphere_quadrature(basis.dim)
        worst = max(factorization_residual(basis, n, x, r, quad) for n, x, r in sample_mean_triples(basis, rng, 20))
        yield Check(f"mean_factorization_{name}", worst, 1e-8)
    basis = bases["rectangle"]
    pair = basis[2]
    h = 1e-3
    prof = mean_profile(pair.eigenfunction, [math.pi / 2, math.pi / 2], np.arange(0, 0.5 + h / 2, h),
                        sphere_quadrature(2), basis.domain)
    yield Check("mean_ode_residual", mean_ode_residual(prof, pair.lam, 2), 1e-6)


def check_weyl(rng) -> Iterator[Check]:
    fi = weyl_fit(build_interval_basis(1.0, 200))
    yield Check("weyl_exponent_interval", abs(fi.exponent / fi.expected_exponent - 1), 0.02)
    fr = weyl_fit(build_rectangle_basis(math.pi, math.pi, 200))
    yield Check("weyl_exponent_rectangle", abs(fr.exponent / fr.expected_exponent - 1), 0.05)
    yield Check("weyl_prefactor_rectangle", abs(fr.constant / (4 / math.pi) - 1), 0.10)


def check_geometry(rng) -> Iterator[Check]:
    h = 1e-3
    tm = compute_t_max(Domain.interval(0, 1), Region.interval(0, 0.1), h)
    yield Check("tmax_interval", abs(tm.value - 0.9), h)
    sq = Domain.rectangle(1.0, 1.0)
    worst = 0.0
    for P, Q in (([0.1, 0.1], [0.9, 0.9]), ([0.2, 0.7], [0.8, 0.3]), ([0.15, 0.5], [0.85, 0.55])):
        d = geodesic_distance(sq, P, Q, 1 / 256)
        worst = max(worst, abs(d / math.dist(P, Q) - 1))
    yield Check("geodesic_square", worst, 0.03)
    d = geodesic_distance(l_shape(1 / 512), [1.5, 0.5], [0.5, 1.5])
    yield Check("geodesic_l_shape", abs(d / math.sqrt(2) - 1), 0.02)
    vals = [compute_t_max(sq, Region.ball([0.5, 0.5], r), 1 / 64).value for r in (0.05, 0.15, 0.3)]
    yield Check("tmax_nested_increase", max(b - a for a, b in zip(vals, vals[1:])), 0.0)


def _interval_setup(T_factor: float, K: int = 12, n_x: int = 16, density: float = 30.0):
    basis = build_interval_basis(math.pi, K)
    T = T_factor * (math.pi - 0.5)
    grid = build_sampling_grid(Region.interval(0, 0.5), T, n_x, int(math.ceil(2 * T * density)))
    return basis, build_observation_operator(basis, grid, K)


def check_ucp(rng) -> Iterator[Check]:
    _, op = _interval_setup(1.1)
    rec = reconstruct_coeffs(op, np.zeros(op.rows), 1e-12)
    yield Check("ucp_zero_data", float(np.max(np.abs(rec.coeffs))), 1e-10)
    c = rng.normal(size=2 * op.K) + 1j * rng.normal(size=2 * op.K)
    rec = reconstruct_coeffs(op, op.matrix @ c, 1e-12)
    yield Check("ucp_round_trip", _rel(rec.coeffs, c), 1e-8)
    lo = _interval_setup(0.2)[1].sigma_min
    hi = _interval_setup(1.5)[1].sigma_min
    yield Check("ucp_sigma_ratio", hi / max(lo, 1e-300), 1.0, ">")
    basis, op = _interval_setup(1.1)
    a = rng.normal(size=op.K) + 1j * rng.normal(size=op.K)
    b = rng.normal(size=op.K) + 1j * rng.normal(size=op.K)
    grid = op.grid
    data = np.concatenate([ap_eval_two_sided(basis, a, b, t, grid.points[:, 0]) for t in grid.times])
    rec = reconstruct_coeffs(op, data, 1e-12)
    yield Check("two_sided_round_trip", _rel(rec.coeffs, np.concatenate([a, b])), 1e-8)


def check_wave(rng) -> Iterator[Check]:
    basis = build_interval_basis(math.pi, 10)
    data = InitialData(basis, rng.normal(size=10), rng.normal(size=10))
    a, b = wave_coeffs_from_initial(data)
    t = np.linspace(0, 10, 21)
    x = np.linspace(0.05, math.pi - 0.05, 17)
    ident = np.max(np.abs(wave_eval_ivp(data, t, x) - ap_eval_two_sided(basis, a, b, t, x).real))
    yield Check("wave_ivp_identity", float(ident), 1e-12)
    E0 = parseval_energy(data)
    drift = max(abs(wave_energy(data, s) - E0) / E0 for s in t)
    yield Check("wave_energy_drift", drift, 1e-8)
    exact, _ = ivp_modal(data, 1.0)
    lf = leapfrog_modal(basis.lambdas(10), data.A / data.lambdas, data.B, 1.0, 1e-3)
    yield Check("wave_ivp_leapfrog", _rel(lf, exact), 1e-3)

    src = SourceData(basis, rng.normal(size=10), g_profile("affine"))
    yield Check("wave_forced_leapfrog", _rel(forced_modal(src, 1.0), forced_leapfrog(src, 1.0, 1e-4)), 1e-3)

    basis = build_interval_basis(math.pi, 8)
    C = rng.normal(size=8)
    T = 1.2 * (math.pi - 0.5)
    dt = 1e-3
    times = dt * np.arange(int(T / dt))
    pts = Region.interval(0, 0.5).sample(8)[:, 0]
    for name, tol in (("affine", 1e-3), ("const", 1e-4)):
        g = g_profile(name)
        y = wave_eval_forced(SourceData(basis, C, g), times, pts)
        est = source_recover(y, g, basis, 8, dt, points=pts)
        yield Check(f"source_recovery_{name}", _rel(est.C, C), tol)


SUITES: dict[str, Callable] = {
    "kernels": check_kernels,
    "means": check_means,
    "weyl": check_weyl,
    "geometry": check_geometry,
    "ucp": check_ucp,
    "wave": check_wave,
}


def run_verify(seed: int = 0, suites=None) -> list[Check]:
    """Run the named suites (all by default) in a fixed order."""
    rng = np.random.default_rng(seed)
    names = list(SUITES) if suites is None else list(suites)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise InvalidArgument(f"unknown verify suites {sorted(unknown)}; expected {list(SUITES)}")
    return [c for name in names for c in SUITES[name](rng)]
