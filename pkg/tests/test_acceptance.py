"""Acceptance criteria: one PASS/FAIL line per criterion.

Tolerances and runtime budgets are fixed constants below. Run with -s or -v
and the lines appear in the terminal output.
"""
import time

import numpy as np
import pytest

from calderon.checks import cauchy_disk_error, faddeev_residual
from calderon.dbar import DEFAULT_TOL, reconstruct_sigma, reconstruct_v_asymptotic, \
    reconstruct_v_explicit, sigma_at, solve_mu_from_h, v_at
from calderon.faddeev import ScatteringAmplitude, default_lambda_grid, scattering_grid, \
    solve_mu, write_amplitude
from calderon.forward import dtn_conductivity, dtn_schrodinger, laplace_dtn
from calderon.grid import ComplexField, GridSpec
from calderon.phantom import make_radial_power, potential_from_conductivity, zero_potential
from calderon.scatter import h_grid_from_dtn
from calderon.stability import StabilityConfig, all_fits, bound_entries, bump_family, \
    check_h_decay, run_family

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail, elapsed, budget):
        ok = ok and elapsed <= budget
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}  {name}: {detail}; "
                  f"{elapsed:.0f} s (budget {budget:.0f} s)")
        return ok
    return emit


def test_criterion_1_identity(report):
    t0 = time.perf_counter()
    ref = laplace_dtn(16).matrix
    e_phi = np.max(np.abs(dtn_schrodinger(None, 16, 256, 256).matrix - ref))
    e_lam = np.max(np.abs(dtn_conductivity(None, 16, 256, 256).matrix - ref))
    lg = default_lambda_grid(8.0, 64)
    h = scattering_grid(zero_potential(), lg)
    mu = solve_mu(zero_potential(), 2 + 1j)
    hz = ScatteringAmplitude(ComplexField(lg, np.zeros((64, 64))), 8.0, 4)
    sl = solve_mu_from_h(hz, 0.3 + 0.2j)
    zg = GridSpec(0j, 1.0, 16, True)
    e_sig = np.max(np.abs(reconstruct_sigma(hz, zg).field.values - 1))
    e_v = max(np.max(np.abs(reconstruct_v_explicit(hz, zg).field.values)),
              np.max(np.abs(reconstruct_v_asymptotic(hz, zg).field.values)))
    ok = (e_phi <= 5e-3 and e_lam <= 5e-3 and h.is_zero() and np.all(mu.values == 1)
          and np.all(sl.values == 1) and e_sig <= 1e-6 and e_v <= 1e-6)
    detail = (f"|Phi-diag|k||={e_phi:.2e}, |Lambda-diag|k||={e_lam:.2e} (tol 5e-3), "
              f"h=0 {h.is_zero()}, sigma err {e_sig:.1e}, v err {e_v:.1e} (tol 1e-6)")
    assert report(1, "identity suite", ok, detail, time.perf_counter() - t0, 60)


def test_criterion_2_conventions(report, bump_h):
    t0 = time.perf_counter()
    ec = cauchy_disk_error()
    ef = max(faddeev_residual(lam) for lam in (2 + 1j, 0.05j, -3 - 5j, 6.0))
    res = [solve_mu_from_h(bump_h, z).residual for z in (0.2 + 0.1j, -0.5j, 0.7 - 0.3j, 0.0)]
    ok = ec <= 1e-2 and ef <= 1e-6 and max(res) <= DEFAULT_TOL
    detail = (f"Cauchy disk {ec:.2e} (tol 1e-2), Faddeev residual {ef:.2e} (tol 1e-6), "
              f"max dbar residual {max(res):.2e} (tol {DEFAULT_TOL})")
    assert report(2, "convention pin", ok, detail, time.perf_counter() - t0, 120)


def test_criterion_3_cross_pipeline(report, bump_v, phi_bump, phi_zero):
    t0 = time.perf_counter()
    h, hd = h_grid_from_dtn(phi_bump, phi_zero, default_lambda_grid(8.0, 64), mode="oracle",
                            v=bump_v, lambda_max=4.0, with_direct=True)
    rel = np.max(np.abs(h.values - hd.values)) / np.max(np.abs(hd.values))
    detail = f"max|h_dtn - h_direct| / max|h_direct| = {rel:.2e} on |lambda| <= 4 (tol 3e-2)"
    assert report(3, "Alessandrini identity vs direct h", rel <= 3e-2, detail,
                  time.perf_counter() - t0, 600)


def test_criterion_4_decay(report):
    m = 3
    v = potential_from_conductivity(make_radial_power(0.5, 0j, 0.8, m), m)
    t_h = time.perf_counter()
    h = scattering_grid(v, GridSpec(0j, 32.0, 256, True), 32.0)
    t_h = time.perf_counter() - t_h
    # the budget assumes h is already cached, so only the decay analysis is timed
    t0 = time.perf_counter()
    rep = check_h_decay(h, m)
    l2 = rep["tails"]["h@2"]["exponent"]
    ok = rep["ring_slope"] <= -m + 0.5 and abs(l2 + (m - 1)) <= 0.5
    detail = (f"ring slope {rep['ring_slope']:.2f} (<= {-m + 0.5}), "
              f"L2 tail exponent {l2:.2f} (target {-(m - 1)} +- 0.5); computing h took {t_h:.0f} s")
    assert report(4, "decay shapes, m=3", ok, detail, time.perf_counter() - t0, 300)


def _probe_points():
    ray = np.linspace(0.0, 0.95, 24)
    off = np.array([0.2j, -0.3 + 0.3j, 0.1 - 0.4j, -0.6j, 0.5 + 0.5j, -0.8])
    return np.concatenate([ray, off]).astype(complex)


def test_criterion_5_round_trip(report, bump, bump_v, bump_h80_timed, tmp_path):
    t0 = time.perf_counter()
    bump_h80, h_seconds = bump_h80_timed
    write_amplitude(tmp_path / "h80.cgrid", bump_h80)
    pts = _probe_points()
    t = 0.5
    e_sig = np.max(np.abs(sigma_at(bump_h80, pts).real - bump.evaluate(pts)))
    ve, va = v_at(bump_h80, pts)
    vtrue = bump_v.evaluate(pts)
    vsup = np.max(np.abs(bump_v.field.values))
    e_ve = np.max(np.abs(ve.real - vtrue)) / vsup
    e_va = np.max(np.abs(va.real - vtrue)) / vsup
    agree = np.max(np.abs(va - ve)) / np.max(np.abs(ve))
    ok = e_sig <= 0.05 * t and e_ve <= 0.1 and e_va <= 0.1 and agree <= 0.1
    detail = (f"sigma sup err {e_sig:.2e} (tol {0.05 * t}), v explicit {e_ve:.2%}, "
              f"v asymptotic {e_va:.2%} of sup|v| (tol 10%), agreement {agree:.2%} (tol 10%); "
              f"{pts.size} probe points, Lambda=80, 512^2 lambda-grid")
    # the budget includes computing the amplitude in the shared fixture
    elapsed = time.perf_counter() - t0 + h_seconds
    assert report(5, "round trip, bump t=0.5", ok, detail, elapsed, 1200)


def test_criterion_6_stability(report):
    t0 = time.perf_counter()
    cfg = StabilityConfig()
    recs = run_family(bump_family(np.geomspace(0.002, 0.4, 10)), cfg)
    fits = all_fits(recs, cfg)
    d = np.array([r.delta for r in recs])
    decades = np.log10(d.max() / d.min())
    entries = bound_entries(fits)
    worst = max(e["bound"]["ratio"] for _, e in entries)
    holds = all(e["bound"]["holds"] for _, e in entries)
    r2 = min(e["fit"].get("r_squared", -np.inf) for _, e in entries)
    comp = fits["h"]["mu_companion"]["stable"] and fits["mu0"]["bounded"]
    alphas = {n: round(e["fit"]["alpha"], 2) for n, e in entries
              if n in ("v:err_v_sup", "v:err_sigma_sup", "h:h_over_lambda@2", "h:h@2")}
    ok = len(recs) >= 8 and decades >= 2 and holds and r2 >= 0.8 and comp
    detail = (f"{len(recs)} pairs over {decades:.2f} decades of delta, {len(entries)} bounds, "
              f"worst C_min/C_fit {worst:.2f} (slack 100), min r^2 {r2:.3f} (>= 0.8), "
              f"mu companions stable {comp}, fitted alpha {alphas}")
    assert report(6, "stability form", ok, detail, time.perf_counter() - t0, 7200)


def test_criterion_7_determinism(report, bump_v, phi_bump, phi_zero, tmp_path):
    t0 = time.perf_counter()
    cfg = StabilityConfig(nb=8, n_r=64, n_theta=64, n_lambda=32, z_side=8)
    fam = bump_family([0.05, 0.2])
    a = [r.to_json() for r in run_family(fam, cfg, jobs=1)]
    b = [r.to_json() for r in run_family(fam, cfg, jobs=2)]
    c = [r.to_json() for r in run_family(fam, cfg, jobs=1)]
    lg = default_lambda_grid(4.0, 8)
    blobs = []
    for i, jobs in enumerate((1, 2, 1)):
        h = scattering_grid(bump_v, lg, radial=False, jobs=jobs)
        write_amplitude(tmp_path / f"h{i}.cgrid", h)
        blobs.append((tmp_path / f"h{i}.cgrid").read_bytes())
    o1 = h_grid_from_dtn(phi_bump, phi_zero, lg, "oracle", bump_v, jobs=1).values
    o2 = h_grid_from_dtn(phi_bump, phi_zero, lg, "oracle", bump_v, jobs=2).values
    ok = a == b == c and blobs[0] == blobs[1] == blobs[2] and np.array_equal(o1, o2)
    detail = (f"records serial==parallel {a == b}, rerun {a == c}; scatter files identical "
              f"{blobs[0] == blobs[1] == blobs[2]}; oracle grids identical {np.array_equal(o1, o2)}")
    assert report(7, "determinism", ok, detail, time.perf_counter() - t0, 1800)
