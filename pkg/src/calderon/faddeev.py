"""Faddeev functions μ(z,λ) and the scattering amplitude h(λ).

μ solves the Lippmann–Schwinger equation μ = 1 - g_λ ∗ (vμ); then
h(λ) = ∫ e_λ(z) v(z) μ(z,λ) dA.  Only the nodes where v ≠ 0 are unknowns.
"""
import json
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import LinearOperator, gmres

from .convolution import FaddeevKernel, exact_radius
from .errors import ConvergenceError, ValidationError
from .grid import ComplexField, GridSpec, read_cgrid, write_cgrid
from .parallel import pmap

PROVENANCES = ("direct", "from_dtn_oracle", "from_dtn_born")
GMRES_RESTART = 50
GMRES_MAX_ITERS = 500


@dataclass(frozen=True)
class ScatteringAmplitude:
    """h sampled on a λ-grid; values with |λ| > lambda_max are zero."""

    field: ComplexField
    lambda_max: float
    m: int
    provenance: str = "direct"
    phantom_recipe: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        lam = self.grid.nodes()
        if np.any(lam == 0):
            raise ValidationError("λ-grid has a node at λ = 0; enable the grid offset")
        if np.any(self.field.values[np.abs(lam) > self.lambda_max] != 0):
            raise ValidationError("h must vanish outside |λ| <= lambda_max")

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values

    def is_zero(self):
        return not np.any(self.field.values)

    def sidecar(self):
        return {"lambda_max": self.lambda_max, "m": self.m, "provenance": self.provenance,
                "phantom_recipe": self.phantom_recipe}


def default_lambda_grid(lambda_max=8.0, n=64):
    return GridSpec(0j, lambda_max, n, True)


def write_amplitude(path, h):
    write_cgrid(path, h.field)
    with open(str(path) + ".json", "w") as fh:
        json.dump(h.sidecar(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_amplitude(path):
    fld = read_cgrid(path)
    try:
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise ValidationError(f"missing sidecar {path}.json") from exc
    return ScatteringAmplitude(fld, float(meta["lambda_max"]), int(meta["m"]),
                               meta.get("provenance", "direct"), meta.get("phantom_recipe"))


def _check_support(v):
    g = v.grid
    if v.support_radius > 0.5 * exact_radius(g.n_side, g.half_width):
        raise ValidationError("potential support too large for the z-grid: pairwise "
                              "distances must stay inside the exact kernel radius")


def solve_mu(v, lam, tol=1e-8, return_info=False):
    """μ(·,λ) on v's grid from μ + g_λ∗(vμ) = 1 by restarted GMRES."""
    g = v.grid
    n = g.n_side
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if v.is_zero():
        mu = ComplexField(g, np.ones((n, n)))
        return (mu, {"iterations": 0, "residual": 0.0}) if return_info else mu
    _check_support(v)
    K = FaddeevKernel(lam, g)
    vals = v.field.values.real
    mask = vals != 0
    vs = vals[mask]
    count = [0]

    def conv(w):
        full = np.zeros((n, n), dtype=np.complex128)
        full[mask] = vs * w
        return K.apply(full)

    def mv(w):
        count[0] += 1
        return w + conv(w)[mask]

    N = vs.size
    op = LinearOperator((N, N), matvec=mv, dtype=np.complex128)
    rhs = np.ones(N, dtype=np.complex128)
    w, info = gmres(op, rhs, rtol=tol, atol=0.0, restart=GMRES_RESTART,
                    maxiter=-(-GMRES_MAX_ITERS // GMRES_RESTART))
    res = float(np.linalg.norm(mv(w) - rhs) / np.sqrt(N))
    if info != 0 or res > tol:
        raise ConvergenceError(f"Lippmann–Schwinger solve failed at λ = {lam} "
                               f"(relative residual {res:.3g})", module="faddeev",
                               stage="solve_mu", lam=complex(lam), residual=res)
    mu = ComplexField(g, 1.0 - conv(w))
    if return_info:
        return mu, {"iterations": count[0] - 1, "residual": res}
    return mu


def scattering_direct(v, lam, mu=None, tol=1e-8):
    """h(λ) = ∫ e_λ v μ dA by the trapezoid rule on v's grid."""
    if v.is_zero():
        return 0j
    if mu is None:
        mu = solve_mu(v, lam, tol)
    z = v.grid.nodes()
    e = np.exp(2j * (z * complex(lam)).real)
    return complex(np.sum(e * v.field.values.real * mu.values) * v.grid.cell ** 2)


def _h_job(v, tol, lam):
    try:
        return scattering_direct(v, lam, tol=tol), None
    except ConvergenceError as exc:
        return np.nan, str(exc)


def is_centered_radial(v):
    rec = v.recipe or {}
    return rec.get("type", "").startswith("radial_") and rec.get("center") == [0.0, 0.0]


def radial_profile(v, radii, tol=1e-8, jobs=1):
    """h at λ = radii (real, nonnegative) for a centered radial potential."""
    out = pmap(partial(_h_job, v, tol), [complex(r) for r in radii], jobs)
    errs = [e for _, e in out if e]
    if errs:
        raise ConvergenceError(f"{len(errs)} radial samples failed: {errs[0]}",
                               module="faddeev", stage="radial_profile")
    return np.array([h for h, _ in out])


def scattering_grid(v, lgrid, lambda_max=None, tol=1e-8, jobs=1, radial="auto",
                    radial_step=0.1):
    """h on every λ-grid node with |λ| ≤ lambda_max.

    For a centered radial phantom h depends on |λ| only (rotating z rotates λ),
    so with ``radial`` enabled h is computed on a fine set of radii and
    interpolated by a cubic spline; otherwise every node is solved.
    """
    lam = lgrid.nodes()
    lmax = lgrid.half_width if lambda_max is None else float(lambda_max)
    inside = np.abs(lam) <= lmax
    vals = np.zeros(lam.shape, dtype=np.complex128)
    recipe = v.recipe
    if not v.is_zero():
        use_radial = is_centered_radial(v) if radial == "auto" else bool(radial)
        if use_radial:
            rmax = float(np.abs(lam[inside]).max())
            K = int(np.ceil(rmax / radial_step)) + 2
            radii = np.arange(K + 1) * (rmax / K)
            prof = radial_profile(v, radii, tol, jobs)
            spl_re = CubicSpline(radii, prof.real)
            spl_im = CubicSpline(radii, prof.imag)
            r = np.abs(lam[inside])
            vals[inside] = spl_re(r) + 1j * spl_im(r)
        else:
            nodes = lam[inside]
            out = pmap(partial(_h_job, v, tol), list(nodes), jobs)
            failed = [e for _, e in out if e]
            if len(failed) > 0.01 * len(out):
                raise ConvergenceError(f"{len(failed)} of {len(out)} λ-nodes failed; "
                                       f"first: {failed[0]}", module="faddeev",
                                       stage="scattering_grid")
            hv = np.array([h for h, _ in out])
            hv[~np.isfinite(hv)] = 0.0
            vals[inside] = hv
    return ScatteringAmplitude(ComplexField(lgrid, vals), lmax, v.m, "direct", recipe)


def born_amplitude(v, lam):
    """(2π)² v̂(2λ_1, -2λ_2) = ∫ e_λ v dA: h with μ replaced by 1."""
    z = v.grid.nodes()
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    vals = v.field.values.real
    mask = vals != 0
    zm, vm = z[mask], vals[mask]
    out = np.array([np.sum(np.exp(2j * (zm * L).real) * vm) for L in lam.ravel()])
    return (out * v.grid.cell ** 2).reshape(lam.shape)


def decay_bound(norm_hat, m, lam):
    """8π² ‖v̂‖_m (1 + 4|λ|²)^{-m/2}."""
    return 8.0 * np.pi ** 2 * norm_hat * (1.0 + 4.0 * np.abs(lam) ** 2) ** (-m / 2.0)
