"""Oracle instruments shared by the test-suite and ``calderon verify``.

Each check returns (passed, detail) so callers can tabulate outcomes.
"""
import os
import tempfile

import numpy as np
from scipy.special import erfc

from .convolution import faddeev_convolve, faddeev_operator, solid_cauchy
from .dbar import reconstruct_sigma, reconstruct_v_asymptotic, reconstruct_v_explicit, \
    solve_mu_from_h
from .faddeev import ScatteringAmplitude, default_lambda_grid, scattering_grid, solve_mu
from .forward import dtn_schrodinger, laplace_dtn
from .grid import ComplexField, GridSpec, read_cgrid, sample, write_cgrid
from .phantom import interpolate, make_radial_bump, potential_from_conductivity, zero_potential
from .scatter import h_grid_from_dtn
from .stability import fit_arrays, perturb_dtn


def cauchy_disk_error(n=512, s=4.0, r_eval=0.9):
    """C[1_D](z) = z̄ inside the unit disk; max relative error for |z| < r_eval."""
    g = GridSpec(0j, s, n, True)
    c = solid_cauchy(sample(g, lambda z: (np.abs(z) < 1).astype(float)))
    z = g.nodes()
    m = np.abs(z) < r_eval
    return float(np.max(np.abs(c.values - np.conj(z))[m] / np.maximum(np.abs(z[m]), 0.1)))


def faddeev_residual(lam, n=128, s=2.1):
    """Relative residual of (-Δ - 4iλ∂̄)(g_λ ∗ f) - f on |z| ≤ s/2 for a Gaussian f.

    The output is multiplied by a smooth window equal to 1 well beyond the
    test disk so the spectral operator sees a periodic function.
    """
    g = GridSpec(0j, s, n, True)
    f = sample(g, lambda z: np.exp(-np.abs(z) ** 2 / 0.05) * (1 + z))
    u = faddeev_convolve(lam, f)
    z = g.nodes()
    chi = 0.5 * erfc((np.abs(z) - 0.78 * s) / (0.045 * s))
    Lu = faddeev_operator(lam, chi * u.values, g)
    inner = np.abs(z) <= s / 2
    return float(np.linalg.norm((Lu - f.values)[inner]) / np.linalg.norm(f.values[inner]))


def identity_dtn_error(nb=16, n=256):
    phi = dtn_schrodinger(None, nb, n, n)
    return float(np.max(np.abs(phi.matrix - laplace_dtn(nb).matrix)))


def _zero_h(lambda_max=8.0, n=64):
    lg = default_lambda_grid(lambda_max, n)
    return ScatteringAmplitude(ComplexField(lg, np.zeros((n, n))), lambda_max, 4)


def trivial_checks():
    """Fast identity checks; every item must pass on any healthy install."""
    out = []

    def add(name, ok, detail=""):
        out.append((name, bool(ok), detail))

    g = GridSpec(0.1 - 0.2j, 1.5, 16, True)
    fld = ComplexField(g, np.arange(256).reshape(16, 16) * (1 + 0.5j))
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "f.cgrid")
        write_cgrid(p, fld)
        back = read_cgrid(p)
    add("CGRID1 round trip", back.grid == g and np.array_equal(back.values, fld.values))

    bump = make_radial_bump(0.5, 0j, 0.5)
    vals = bump.evaluate(np.array([0.0, 0.5, 0.7j]))
    add("bump peak 1+t, 1 outside", abs(vals[0] - 1.5) < 1e-14 and np.all(vals[1:] == 1.0))

    err = identity_dtn_error(16, 128)
    add("v = 0 gives diag(|k|)", err <= 5e-3, f"max entry error {err:.2e} at N=128")

    v0 = zero_potential()
    h0 = scattering_grid(v0, default_lambda_grid(8.0, 32))
    add("v = 0 gives h = 0", h0.is_zero())

    hz = _zero_h()
    sl = solve_mu_from_h(hz, 0.3 + 0.1j)
    add("h = 0 gives mu = 1 exactly", np.all(sl.values == 1.0) and sl.residual == 0.0)

    zg = GridSpec(0j, 1.0, 16, True)
    s_rec = reconstruct_sigma(hz, zg)
    ve = reconstruct_v_explicit(hz, zg)
    va = reconstruct_v_asymptotic(hz, zg)
    add("h = 0 gives sigma = 1, v = 0",
        np.all(s_rec.field.values == 1.0) and ve.is_zero() and va.is_zero())

    phi0 = laplace_dtn(4)
    hh = h_grid_from_dtn(phi0, phi0, default_lambda_grid(4.0, 16))
    add("Phi = Phi0 gives h = 0", hh.is_zero())

    add("perturbation of size 0 is the identity", perturb_dtn(phi0, 0.0) is phi0)

    d = np.geomspace(1e-4, 1e-1, 8)
    f = fit_arrays(d, 2.0 * np.log(3 + 1 / d) ** -3.0)
    add("exact modulus recovery", abs(f.C - 2) < 1e-10 and abs(f.alpha - 3) < 1e-10,
        f"C={f.C:.12g}, alpha={f.alpha:.12g}")
    return out


def oracle_checks():
    """Slower convention pins and cross-pipeline oracles."""
    out = []
    e = cauchy_disk_error()
    out.append(("Cauchy transform of the unit disk", e <= 1e-2, f"rel err {e:.2e}"))
    r = max(faddeev_residual(lam) for lam in (2 + 1j, 0.05j, -3 - 5j))
    out.append(("Faddeev operator-apply residual", r <= 1e-6, f"residual {r:.2e}"))

    sigma = make_radial_bump(0.5, 0j, 0.5)
    v = potential_from_conductivity(sigma)
    nb = 16
    phi = dtn_schrodinger(v, nb)
    phi0 = dtn_schrodinger(None, nb)
    lg = GridSpec(0j, 4.0, 8, True)
    h, hd = h_grid_from_dtn(phi, phi0, lg, mode="oracle", v=v, lambda_max=4.0,
                            with_direct=True)
    rel = float(np.max(np.abs(h.values - hd.values)) / np.max(np.abs(hd.values)))
    out.append(("Alessandrini identity vs direct h", rel <= 3e-2, f"rel err {rel:.2e}"))

    lgrid = default_lambda_grid(8.0, 64)
    hs = scattering_grid(v, lgrid)
    z = 0.2 + 0.1j
    sl = solve_mu_from_h(hs, z)
    lam = lgrid.nodes()
    pick = [(32, 32), (40, 40), (20, 33), (35, 50), (10, 20)]
    fwd = np.array([interpolate(solve_mu(v, lam[i], 1e-10), np.array([z]))[0] for i in pick])
    got = np.array([sl.values[i] for i in pick])
    rel = float(np.linalg.norm(got - fwd) / np.linalg.norm(fwd))
    out.append(("dbar slice vs forward mu", rel <= 3e-2, f"rel L2 {rel:.2e}"))
    return out
