"""Scattering amplitude from boundary data through the Alessandrini identity.

For a potential v and the Laplacian DtN map Φ₀,

    h(λ) = ∫_{∂D} e^{i z̄ λ̄} (Φ - Φ₀) ψ(·,λ) dθ,

by Green's identity with the harmonic weight e^{i z̄ λ̄} = conj(e^{-izλ}).
In the Fourier basis this is 2π Σ_j conj(a_j) [(Φ - Φ₀) b]_j with
a_j = (-iλ)^j/j! (j ≥ 0) the coefficients of e^{-izλ} on |z| = 1 and b the
coefficients of the trace of ψ.  (Pairing against conj(e^{+izλ}) instead
fails the Born and oracle checks.)  The trace comes either from a forward
Faddeev solve ("oracle") or from the approximation ψ ≈ e^{izλ} ("born").
"""
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import gammaln

from .errors import ValidationError
from .faddeev import ScatteringAmplitude, scattering_direct, solve_mu
from .grid import ComplexField
from .parallel import pmap

MODES = ("oracle", "born")


@dataclass(frozen=True)
class BoundaryFunction:
    """Fourier coefficients c_k, k = -N_b..N_b, of a function on |z| = 1."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ValidationError("coefficient vector must have odd length 2N_b+1")
        if not np.all(np.isfinite(c)):
            raise ValidationError("non-finite boundary coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self):
        return (self.coeffs.size - 1) // 2

    def coefficient(self, k):
        return self.coeffs[k + self.n_modes]


def exp_coefficients(lam, nb):
    """Coefficients of e^{izλ} on the unit circle: (iλ)^k/k! for k ≥ 0."""
    lam = complex(lam)
    k = np.arange(-nb, nb + 1)
    out = np.zeros(2 * nb + 1, dtype=np.complex128)
    pos = k >= 0
    if lam == 0:
        out[nb] = 1.0
        return out
    kp = k[pos]
    out[pos] = np.exp(kp * np.log(abs(lam)) - gammaln(kp + 1.0)) * (1j * lam / abs(lam)) ** kp
    return out


def boundary_trace_psi(mu, lam, nb, order=1):
    """Fourier coefficients of ψ = e^{izλ} μ on |z| = 1.

    μ is interpolated (bilinear by default, ``order`` is the spline order) at
    4N_b equispaced circle points and the samples are projected by FFT.
    """
    g = mu.grid
    c = g.center
    reach = g.half_width - 4 * g.cell
    if abs(c.real) + 1.0 > reach or abs(c.imag) + 1.0 > reach:
        raise ValidationError("μ grid must cover the unit circle with 4 cells of margin")
    M = max(4 * nb, 4)
    th = 2 * np.pi * np.arange(M) / M
    z = np.exp(1j * th)
    a0 = g.axis[0]
    coords = np.array([(z.imag - c.imag - a0) / g.cell, (z.real - c.real - a0) / g.cell])
    vals = mu.values
    s = (map_coordinates(vals.real, coords, order=order, prefilter=order > 1)
         + 1j * map_coordinates(vals.imag, coords, order=order, prefilter=order > 1))
    psi = np.exp(1j * z * complex(lam)) * s
    co = np.fft.fft(psi) / M
    return BoundaryFunction(co[np.arange(-nb, nb + 1) % M])


def born_trace(lam, nb):
    return BoundaryFunction(exp_coefficients(lam, nb))


def h_from_dtn(phi, phi0, lam, psi_trace):
    """2π Σ_j conj(a_j) [(Φ - Φ₀) b]_j with a the coefficients of e^{-izλ}."""
    if phi.n_modes != phi0.n_modes or psi_trace.n_modes != phi.n_modes:
        raise ValidationError("operators and trace must have the same number of modes")
    a = exp_coefficients(-complex(lam), phi.n_modes)
    return complex(2 * np.pi * np.vdot(a, (phi.matrix - phi0.matrix) @ psi_trace.coeffs))


def _oracle_job(phi, phi0, v, tol, order, lam):
    mu = solve_mu(v, lam, tol)
    tr = boundary_trace_psi(mu, lam, phi.n_modes, order)
    return h_from_dtn(phi, phi0, lam, tr), scattering_direct(v, lam, mu)


def h_grid_from_dtn(phi, phi0, lgrid, mode="born", v=None, lambda_max=None, tol=1e-8,
                    jobs=1, order=1, with_direct=False):
    """h_from_dtn on all λ-grid nodes with |λ| ≤ lambda_max.

    Oracle mode needs the potential ``v`` to compute ψ traces; with
    ``with_direct`` the direct amplitude from the same μ solves is returned too.
    """
    if mode not in MODES:
        raise ValidationError(f"psi mode must be one of {MODES}")
    lam = lgrid.nodes()
    lmax = lgrid.half_width if lambda_max is None else float(lambda_max)
    inside = np.abs(lam) <= lmax
    vals = np.zeros(lam.shape, dtype=np.complex128)
    direct = np.zeros_like(vals)
    m = v.m if v is not None else 4
    recipe = v.recipe if v is not None else None
    if not np.array_equal(phi.matrix, phi0.matrix):
        nodes = list(lam[inside])
        if mode == "born":
            nb = phi.n_modes
            vals[inside] = [h_from_dtn(phi, phi0, L, born_trace(L, nb)) for L in nodes]
        else:
            if v is None:
                raise ValidationError("oracle mode needs the potential for ψ traces")
            if v.is_zero():
                raise ValidationError("oracle mode with v = 0 but Φ ≠ Φ₀")
            out = pmap(partial(_oracle_job, phi, phi0, v, tol, order), nodes, jobs)
            vals[inside] = [a for a, _ in out]
            direct[inside] = [b for _, b in out]
    prov = "from_dtn_oracle" if mode == "oracle" else "from_dtn_born"
    h = ScatteringAmplitude(ComplexField(lgrid, vals), lmax, m, prov, recipe)
    if with_direct:
        return h, ScatteringAmplitude(ComplexField(lgrid, direct), lmax, m, "direct", recipe)
    return h
