"""Inverse side: the ∂̄-equation in λ and the reconstructions of σ and v.

For fixed z, μ(z,·) solves μ = 1 + C[a conj μ] with
a(λ) = h(λ) e_{-λ}(z) / (4π λ̄) and C the solid Cauchy transform in λ
(area measure dA; dλ dλ̄ = -2i dA).  The map is real-linear, so GMRES runs
on (Re μ, Im μ).

Large-λ development μ = 1 + μ₋₁(z)/λ + O(λ⁻²) gives
    μ₋₁(z) = (1/4π²) ∫ (h/λ̄) e_{-λ}(z) conj μ(z,λ) dA,   v = 4i ∂μ₋₁/∂z̄,
and differentiating under the integral gives the explicit formula
    v(z) = (1/π²) ∫ e_{-λ}(z) [h conj μ + i (h/λ̄) conj(∂μ/∂z)] dA.
With μ ≈ 1 both reduce to v = (1/π²) ∫ h e_{-λ} dA, the inverse of the Born
map h = (2π)² v̂(2λ_1, -2λ_2).

Derivatives in z are central differences with a small step δ between
independent slices μ(z ± δ, ·), μ(z ± iδ, ·).  The slices are exact
functions of z, so δ is not tied to any z-grid spacing.
"""
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .convolution import _cauchy_symbol, _pad_convolve, dbar_fd
from .errors import ConvergenceError, NumericalError, ValidationError
from .grid import ComplexField, constant
from .parallel import pmap
from .phantom import Conductivity, Potential

DEFAULT_TOL = 5e-2
DIFF_STEP = 1e-3
IMAG_SIGMA_LIMIT = 0.05
IMAG_V_LIMIT = 0.10


@dataclass(frozen=True)
class MuSlice:
    """μ(z,·) on the λ-grid with its ∂̄ residual."""

    z: complex
    field: ComplexField
    residual: float

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values


def dbar_coefficient(h, z):
    """a(λ) = h(λ) e_{-λ}(z) / (4π λ̄)."""
    lam = h.grid.nodes()
    return h.values * np.exp(-2j * (complex(z) * lam).real) / (4 * np.pi * np.conj(lam))


def _solve_slice(h, z, krylov_tol):
    g = h.grid
    n = g.n_side
    a = dbar_coefficient(h, z)
    sym = _cauchy_symbol(n, g.half_width)
    mask = np.abs(g.nodes()) <= h.lambda_max
    am = a[mask]

    def cauchy(f_in):
        full = np.zeros((n, n), dtype=np.complex128)
        full[mask] = f_in
        return _pad_convolve(full, sym)

    N = am.size
    # unknown w = μ - 1 on the disk: w - C[a conj w] = C[a]
    rhs_c = cauchy(am)[mask]

    def mv(x):
        w = x[:N] + 1j * x[N:]
        y = w - cauchy(am * np.conj(w))[mask]
        return np.concatenate([y.real, y.imag])

    op = LinearOperator((2 * N, 2 * N), matvec=mv, dtype=np.float64)
    rhs = np.concatenate([rhs_c.real, rhs_c.imag])
    x, info = gmres(op, rhs, rtol=krylov_tol, atol=0.0, restart=50, maxiter=10)
    res = np.linalg.norm(mv(x) - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if info != 0 or res > krylov_tol * 10:
        raise ConvergenceError(f"∂̄ solve did not converge at z = {z} (residual {res:.3g})",
                               module="dbar-solve", stage="krylov", z=complex(z))
    w = x[:N] + 1j * x[N:]
    mu = 1.0 + cauchy(am * np.conj(w) + am)
    return mu, a


def solve_mu_from_h(h, z, tol=DEFAULT_TOL, krylov_tol=1e-10):
    """μ(z,·) on h's λ-grid; the centered-difference ∂̄ residual must be ≤ tol."""
    g = h.grid
    if np.any(g.nodes() == 0):
        raise ValidationError("λ-grid has a node at 0; enable the offset")
    if h.is_zero():
        return MuSlice(complex(z), constant(g, 1.0), 0.0)
    mu, a = _solve_slice(h, z, krylov_tol)
    rhs = a * np.conj(mu)
    res = float(np.max(np.abs(dbar_fd(mu, g.cell) - rhs[1:-1, 1:-1])))
    if res > tol:
        raise NumericalError(f"∂̄ residual {res:.3g} exceeds tol {tol:.3g} at z = {z}",
                             module="dbar-solve", stage="residual", z=complex(z))
    return MuSlice(complex(z), ComplexField(g, mu), res)


def _cauchy_at_zero(f, grid):
    """(1/π)∫ f(w)/(0 - w) dA for the trigonometric interpolant of f."""
    n = grid.n_side
    s = grid.half_width
    sym = _cauchy_symbol(n, s)
    pad = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    pad[:n, :n] = f
    F = np.fft.fft2(pad) * sym
    xi = 2.0 * np.pi * np.fft.fftfreq(2 * n, d=grid.cell)
    x0 = grid.axis[0]
    # evaluate the inverse transform at λ = 0, i.e. displacement -x0 from node (0,0)
    ph1 = np.exp(1j * xi * (0.0 - grid.center.real - x0))
    ph2 = np.exp(1j * xi * (0.0 - grid.center.imag - x0))
    return complex(ph2 @ F @ ph1) / (2 * n) ** 2


def mu_at_zero(slc, h, method="spectral"):
    """μ(z, λ → 0): 'nearest' takes the node nearest 0, 'spectral' evaluates
    1 + C[a conj μ](0) exactly for the interpolated integrand."""
    if method == "nearest":
        lam = slc.grid.nodes()
        return complex(slc.values.flat[np.argmin(np.abs(lam))])
    if method != "spectral":
        raise ValidationError(f"unknown λ→0 method {method!r}")
    if h.is_zero():
        return 1.0 + 0j
    f = dbar_coefficient(h, slc.z) * np.conj(slc.values)
    return 1.0 + _cauchy_at_zero(f, slc.grid)


def _sigma_job(h, tol, method, z):
    slc = solve_mu_from_h(h, z, tol)
    return mu_at_zero(slc, h, method)


def _disk_nodes(zgrid):
    z = zgrid.nodes()
    return z, np.abs(z) < 1.0


def sigma_at(h, points, tol=DEFAULT_TOL, method="spectral", jobs=1):
    """σ = μ(z,0)² at the given points (complex array)."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if h.is_zero():
        return np.ones(pts.shape, dtype=complex)
    mu0 = np.array(pmap(partial(_sigma_job, h, tol, method), list(pts.ravel()), jobs))
    return (mu0 ** 2).reshape(pts.shape)


def _check_sigma(vals):
    if np.max(np.abs(vals.imag), initial=0.0) > IMAG_SIGMA_LIMIT:
        raise NumericalError(f"imaginary part {np.abs(vals.imag).max():.3g} of σ exceeds "
                             f"{IMAG_SIGMA_LIMIT}", module="dbar-solve", stage="reconstruct_sigma")
    if np.min(vals.real, initial=1.0) <= 0:
        raise NumericalError("reconstructed σ has a nonpositive value",
                             module="dbar-solve", stage="reconstruct_sigma")
    return vals.real


def reconstruct_sigma(h, zgrid, tol=DEFAULT_TOL, method="spectral", jobs=1):
    """σ on the z-grid nodes inside the unit disk (1 outside)."""
    z, inside = _disk_nodes(zgrid)
    out = np.ones(z.shape)
    if not h.is_zero():
        out[inside] = _check_sigma(sigma_at(h, z[inside], tol, method, jobs))
    lo, hi = float(out.min()), float(out.max())
    return Conductivity(ComplexField(zgrid, out), lo, hi, 1.0)


def _stencil(z, step):
    return [z, z + step, z - step, z + 1j * step, z - 1j * step]


@dataclass(frozen=True)
class PointData:
    """Everything reconstructed at one z from the five stencil slices."""

    z: complex
    mu0: complex
    v_explicit: complex
    v_asymptotic: complex
    slice: Optional[MuSlice] = None


def point_data(h, z, tol=DEFAULT_TOL, step=DIFF_STEP, keep_slice=False, method="spectral"):
    """μ(z,0), v_explicit(z), v_asymptotic(z) from slices at z, z ± δ, z ± iδ."""
    z = complex(z)
    if h.is_zero():
        one = MuSlice(z, constant(h.grid, 1.0), 0.0) if keep_slice else None
        return PointData(z, 1.0 + 0j, 0j, 0j, one)
    slices = [solve_mu_from_h(h, p, tol) for p in _stencil(z, step)]
    lam = h.grid.nodes()
    dA = h.grid.cell ** 2
    hv = h.values
    q = hv / np.conj(lam)
    mu_c = slices[0].values
    d_mu = 0.5 * ((slices[1].values - slices[2].values)
                  - 1j * (slices[3].values - slices[4].values)) / (2 * step)
    e0 = np.exp(-2j * (z * lam).real)
    v_exp = np.sum(e0 * (hv * np.conj(mu_c) + 1j * q * np.conj(d_mu))) * dA / np.pi ** 2

    def mu_m1(k):
        e = np.exp(-2j * (slices[k].z * lam).real)
        return np.sum(q * e * np.conj(slices[k].values)) * dA / (4 * np.pi ** 2)

    dbar = 0.5 * ((mu_m1(1) - mu_m1(2)) + 1j * (mu_m1(3) - mu_m1(4))) / (2 * step)
    return PointData(z, mu_at_zero(slices[0], h, method), complex(v_exp), complex(4j * dbar),
                     slices[0] if keep_slice else None)


def _v_job(h, tol, step, z):
    d = point_data(h, z, tol, step)
    return d.v_explicit, d.v_asymptotic


def v_at(h, points, tol=DEFAULT_TOL, step=DIFF_STEP, jobs=1):
    """(v_explicit, v_asymptotic) at the given points, complex (imag = residue)."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if h.is_zero():
        z = np.zeros(pts.shape, dtype=complex)
        return z, z.copy()
    out = pmap(partial(_v_job, h, tol, step), list(pts.ravel()), jobs)
    ve = np.array([a for a, _ in out]).reshape(pts.shape)
    va = np.array([b for _, b in out]).reshape(pts.shape)
    return ve, va


def born_inversion_at(h, points):
    """(1/π²) ∫ h e_{-λ}(z) dA: both formulas with μ ≡ 1."""
    lam = h.grid.nodes()
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    dA = h.grid.cell ** 2
    out = [np.sum(h.values * np.exp(-2j * (p * lam).real)) * dA / np.pi ** 2 for p in pts.ravel()]
    return np.array(out).reshape(pts.shape)


def _mu0_job(h, tol, method, z):
    return mu_at_zero(solve_mu_from_h(h, z, tol), h, method)


def v_from_mu0_at(h, points, tol=DEFAULT_TOL, step=1e-2, method="spectral", jobs=1):
    """v = Δμ₀/μ₀ with μ₀ = μ(·,0) = σ^{1/2}, by the five-point Laplacian.

    An independent route to v through the conductivity reconstruction.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if h.is_zero():
        return np.zeros(pts.shape, dtype=complex)
    items = [p for z in pts.ravel() for p in _stencil(z, step)]
    m0 = np.array(pmap(partial(_mu0_job, h, tol, method), items, jobs)).reshape(-1, 5)
    lap = (m0[:, 1:].sum(axis=1) - 4 * m0[:, 0]) / step ** 2
    return (lap / m0[:, 0]).reshape(pts.shape)


def _as_potential(vals, zgrid, inside, m, stage):
    sup = np.max(np.abs(vals.real), initial=0.0)
    if np.max(np.abs(vals.imag), initial=0.0) > IMAG_V_LIMIT * max(sup, 1e-300) and sup > 0:
        raise NumericalError(f"imaginary residue exceeds {IMAG_V_LIMIT:.0%} of sup|v|",
                             module="dbar-solve", stage=stage)
    out = np.zeros(zgrid.nodes().shape)
    out[inside] = vals.real
    z = zgrid.nodes()
    rad = float(np.abs(z[inside]).max()) if inside.any() else 0.0
    return Potential(ComplexField(zgrid, out), max(m, 3), rad)


def _reconstruct_v(h, zgrid, tol, step, jobs, which):
    z, inside = _disk_nodes(zgrid)
    vals = np.zeros(inside.sum(), dtype=complex)
    if not h.is_zero():
        ve, va = v_at(h, z[inside], tol, step, jobs)
        vals = ve if which == "explicit" else va
    return _as_potential(vals, zgrid, inside, h.m, f"reconstruct_v_{which}")


def reconstruct_v_explicit(h, zgrid, tol=DEFAULT_TOL, step=DIFF_STEP, jobs=1):
    return _reconstruct_v(h, zgrid, tol, step, jobs, "explicit")


def reconstruct_v_asymptotic(h, zgrid, tol=DEFAULT_TOL, step=DIFF_STEP, jobs=1):
    return _reconstruct_v(h, zgrid, tol, step, jobs, "asymptotic")
