"""Acceptance criteria 1-11, each checked at its stated tolerance.

Every test reports a single PASS/FAIL line through the ``acceptance`` fixture;
the lines are repeated in the terminal summary.
"""

import math
import time

import numpy as np
from scipy import special

from unicont.cli import main
from unicont.domains import Domain, Region, l_shape
from unicont.eigenbasis import build_interval_basis, build_rectangle_basis, weyl_fit
from unicont.geometry import compute_t_max, geodesic_distance
from unicont.kernels import bessel_j0, g_closed, g_series, theta_transform_residual
from unicont.means import factorization_residual, mean_ode_residual, mean_profile, sphere_quadrature
from unicont.series import ap_eval_two_sided
from unicont.ucp import build_observation_operator, build_sampling_grid, reconstruct_coeffs
from unicont.wave import (InitialData, SourceData, g_profile, ivp_modal, leapfrog_modal, parseval_energy,
                          source_recover, volterra_solve, wave_coeffs_from_initial, wave_energy, wave_eval_forced,
                          wave_eval_ivp)

OMEGA = Region.interval(0, 0.5)
T_MAX = math.pi - 0.5


def rel(est, ref) -> float:
    return float(np.linalg.norm(np.asarray(est) - ref) / np.linalg.norm(ref))


def interval_operator(T, K=12, n_x=16, density=30.0):
    basis = build_interval_basis(math.pi, K)
    grid = build_sampling_grid(OMEGA, T, n_x, int(math.ceil(2 * T * density)))
    return basis, build_observation_operator(basis, grid, K)


def test_1_kernel_fidelity(acceptance):
    x = np.linspace(0.0, 40.0, 4001)
    t0 = time.perf_counter()
    errs = [float(np.max(np.abs(g_series(N, x) - g_closed(N, x)))) for N in (1, 2, 3)]
    elapsed = time.perf_counter() - t0
    # closed forms taken from scipy rather than the package
    ref = [np.cos(x), special.j0(x), np.sinc(x / np.pi)]
    errs_ref = [float(np.max(np.abs(g_series(N, x) - ref[N - 1]))) for N in (1, 2, 3)]
    worst = max(errs + errs_ref)
    acceptance(1, "series G_N matches closed forms on [0, 40]", worst <= 1e-10 and elapsed < 1.0,
               f"max error {worst:.2e}, {elapsed:.3f} s")


def test_2_bessel_oracle(acceptance):
    xs = np.linspace(0.0, 30.0, 100)
    u, w = np.polynomial.legendre.leggauss(200)
    t = 0.5 * math.pi * (u + 1)
    oracle = 0.5 * np.cos(np.multiply.outer(xs, np.sin(t))) @ w
    err = float(np.max(np.abs(bessel_j0(xs) - oracle)))
    acceptance(2, "bessel_j0 against its integral representation", err <= 1e-10, f"max error {err:.2e}")


def test_3_theta_fourier_pair(acceptance):
    worst = {}
    for N in (3, 2):
        worst[N] = max(theta_transform_residual(N, r, lam)
                       for r in (0.5, 1.0, 2.0) for lam in np.linspace(-20 / r, 20 / r, 81))
    ok = worst[3] <= 1e-8 and worst[2] <= 1e-7
    acceptance(3, "theta Fourier pair", ok, f"N=3 {worst[3]:.2e}, N=2 {worst[2]:.2e}")


def test_4_spherical_mean_factorization(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for basis in (build_interval_basis(math.pi, 10), build_rectangle_basis(math.pi, math.pi, 10)):
        quad = sphere_quadrature(basis.dim)
        lo, hi = basis.domain.bbox
        for _ in range(20):
            n = int(rng.integers(1, 11))
            x = lo + (hi - lo) * (0.05 + 0.9 * rng.random(basis.dim))
            clear = float(np.min(np.minimum(x - lo, hi - x)))
            r = clear * rng.random()
            worst = max(worst, factorization_residual(basis, n, x if basis.dim > 1 else x[0], r, quad))
    # the central-difference defect grows like h^2 lam^4 r / 12, so the check uses the low modes
    h = 1e-3
    radii = np.arange(0, 1.0 + h / 2, h)
    line = build_interval_basis(math.pi, 1)
    ode = mean_ode_residual(mean_profile(line[0].eigenfunction, [math.pi / 2], radii, sphere_quadrature(1)),
                            line[0].lam, 1)
    rect = build_rectangle_basis(math.pi, math.pi, 10)
    for pair in rect.pairs:
        if pair.lambda_sq <= 8:
            prof = mean_profile(pair.eigenfunction, [1.4, 1.7], radii, sphere_quadrature(2), rect.domain)
            ode = max(ode, mean_ode_residual(prof, pair.lam, 2))
    acceptance(4, "spherical mean factorization and radial ODE", worst <= 1e-8 and ode <= 1e-6,
               f"factorization {worst:.2e}, ODE {ode:.2e}")


def test_5_weyl_trend(acceptance):
    fi = weyl_fit(build_interval_basis(math.pi, 200))
    fr = weyl_fit(build_rectangle_basis(math.pi, math.pi, 200))
    e1 = abs(fi.exponent / 2.0 - 1)
    e2 = abs(fr.exponent / 1.0 - 1)
    c2 = abs(fr.constant / (4 / math.pi) - 1)
    acceptance(5, "Weyl exponent and prefactor", e1 <= 0.02 and e2 <= 0.05 and c2 <= 0.10,
               f"interval {e1:.2%}, rectangle {e2:.2%}, prefactor {c2:.2%}")


def test_6_geodesic_oracles(acceptance):
    h = 1e-3
    t_int = compute_t_max(Domain.interval(0, 1), Region.interval(0, 0.1), h).value
    ok_int = abs(t_int - 0.9) <= h

    sq = Domain.rectangle(1.0, 1.0)
    rng = np.random.default_rng(6)
    sq_err = 0.0
    for _ in range(4):
        P, Q = 0.05 + 0.9 * rng.random(2), 0.05 + 0.9 * rng.random(2)
        if np.linalg.norm(P - Q) < 0.3:
            continue
        sq_err = max(sq_err, abs(geodesic_distance(sq, P, Q, 1 / 256) / np.linalg.norm(P - Q) - 1))

    d_l = geodesic_distance(l_shape(1 / 512), [1.5, 0.5], [0.5, 1.5])
    l_err = abs(d_l / math.sqrt(2) - 1)

    dom = l_shape(1 / 32)
    lat = dom.lattice()
    xy = lat.node_coords(np.argwhere(np.ones(lat.shape, dtype=bool))).reshape(lat.shape + (2,))
    masks = [(xy[..., 0] < w) & (xy[..., 1] < w) & lat.interior for w in (0.3, 0.6, 0.9)]
    vals = [compute_t_max(dom, m).value for m in masks]
    mono = vals[0] >= vals[1] >= vals[2]

    acceptance(6, "geodesic oracles", ok_int and sq_err <= 0.03 and l_err <= 0.02 and mono,
               f"interval T_max {t_int:.6f}, square {sq_err:.2%}, L-shape {l_err:.2%}, nested {vals}")


def test_7_finite_uniqueness(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    _, op = interval_operator(1.1 * T_MAX)
    zero = reconstruct_coeffs(op, np.zeros(op.rows), 1e-12).coeffs
    c = rng.normal(size=24) + 1j * rng.normal(size=24)
    trip = rel(reconstruct_coeffs(op, op.matrix @ c, 1e-12).coeffs, c)
    lo = interval_operator(0.2 * T_MAX)[1].sigma_min
    hi = interval_operator(1.5 * T_MAX)[1].sigma_min
    elapsed = time.perf_counter() - t0
    ok = np.max(np.abs(zero)) <= 1e-10 and trip <= 1e-8 and hi > lo and elapsed < 30
    acceptance(7, "finite-truncation uniqueness on (0, pi) with omega = (0, 0.5)", ok,
               f"round trip {trip:.2e}, sigma ratio {hi / lo:.3e}, {elapsed:.2f} s")


def test_8_two_sided_round_trip(acceptance):
    rng = np.random.default_rng(8)
    basis, op = interval_operator(1.1 * T_MAX)
    a = rng.normal(size=12) + 1j * rng.normal(size=12)
    b = rng.normal(size=12) + 1j * rng.normal(size=12)
    x = op.grid.points[:, 0]
    data = np.concatenate([ap_eval_two_sided(basis, a, b, t, x) for t in op.grid.times])
    rec = reconstruct_coeffs(op, data, 1e-12)
    err = max(rel(rec.a, a), rel(rec.b, b))
    acceptance(8, "two-sided series with independent a and b", err <= 1e-8, f"relative error {err:.2e}")


def test_9_wave_ivp(acceptance):
    rng = np.random.default_rng(9)
    basis = build_interval_basis(math.pi, 10)
    data = InitialData(basis, rng.normal(size=10), rng.normal(size=10))
    a, b = wave_coeffs_from_initial(data)
    t = np.linspace(0, 10, 41)
    x = np.linspace(0.02, math.pi - 0.02, 25)
    ident = float(np.max(np.abs(wave_eval_ivp(data, t, x) - ap_eval_two_sided(basis, a, b, t, x).real)))
    E0 = parseval_energy(data)
    drift = max(abs(wave_energy(data, s) - E0) / E0 for s in t)
    exact, _ = ivp_modal(data, 1.0)
    lf = rel(leapfrog_modal(data.lambdas, data.A / data.lambdas, data.B, 1.0, 1e-3), exact)
    acceptance(9, "wave initial-value problem", ident <= 1e-12 and drift <= 1e-8 and lf <= 1e-3,
               f"identity {ident:.2e}, energy drift {drift:.2e}, leapfrog {lf:.2e}")


def test_10_source_recovery(acceptance):
    rng = np.random.default_rng(10)
    basis = build_interval_basis(math.pi, 8)
    C = rng.normal(size=8)
    dt = 1e-3
    times = dt * np.arange(int(1.2 * T_MAX / dt))
    pts = OMEGA.sample(8)[:, 0]
    errs = {}
    for name in ("affine", "const"):
        g = g_profile(name)
        obs = wave_eval_forced(SourceData(basis, C, g), times, pts)
        errs[name] = rel(source_recover(obs, g, basis, 8, dt, points=pts).C, C)
    y = wave_eval_forced(SourceData(basis, C, g_profile("const")), times, pts)
    exact_step = np.array_equal(volterra_solve(1.0, g_profile("const").dg, y, dt),
                                np.gradient(y, dt, axis=0, edge_order=2))
    ok = errs["affine"] <= 1e-3 and errs["const"] <= 1e-4 and exact_step
    acceptance(10, "source recovery through the Volterra reduction", ok,
               f"g = 1 + t/2: {errs['affine']:.2e}, g = 1: {errs['const']:.2e}")


def test_11_determinism(acceptance, tmp_path, capsys):
    codes, blobs = [], []
    for k in range(2):
        out = tmp_path / f"run{k}"
        codes.append(main(["verify", "--seed", "11", "--out", str(out)]))
        blobs.append((out / "results.csv").read_bytes())
    capsys.readouterr()
    acceptance(11, "verify reruns give byte-identical CSV", codes == [0, 0] and blobs[0] == blobs[1],
               f"exit codes {codes}, {len(blobs[0])} bytes")
