"""Conductivity phantoms, conductivity-type potentials and their norms.

Every phantom is radial about its center with profile σ = 1 + t·p(ρ),
ρ = |z - c|/r, p supported in ρ < 1:

* ``radial_bump``:  p = exp(1 - 1/(1 - ρ²)), C^∞.
* ``radial_power``: p = (1 - ρ²)^κ with κ = m + 1/2.  The potential then has
  |v̂(p)| ~ |p|^{-m} exactly (the only singularity is the edge |z - c| = r),
  which gives a scattering amplitude with a clean power-law tail.

Grid values of v come from spectral differentiation of σ^{1/2}; the closed
form is kept alongside for evaluation off the grid (polar forward solves).
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .convolution import spectral_derivative
from .errors import ValidationError
from .grid import ComplexField, GridSpec

DEFAULT_ZGRID = GridSpec(0j, 2.1, 256, True)
MAX_NORM_ORDER = 8


@dataclass(frozen=True)
class RadialProfile:
    """σ(z) = 1 + t p(|z - c|/r) with closed-form derivatives."""

    kind: str
    t: float
    center: complex
    radius: float
    kappa: float = 0.0

    def _p(self, rho):
        """p, p_ρ/ρ and p_ρρ, zero outside ρ < 1."""
        rho = np.asarray(rho, dtype=float)
        p = np.zeros_like(rho)
        pr_over = np.zeros_like(rho)
        prr = np.zeros_like(rho)
        ins = rho < 1.0
        x = rho[ins]
        q = 1.0 - x * x
        if self.kind == "radial_bump":
            e = np.exp(1.0 - 1.0 / q)
            p[ins] = e
            pr_over[ins] = -2.0 * e / q ** 2
            prr[ins] = e * (-2.0 / q ** 2 + 4.0 * x * x / q ** 4 - 8.0 * x * x / q ** 3)
        else:
            k = self.kappa
            p[ins] = q ** k
            pr_over[ins] = -2.0 * k * q ** (k - 1.0)
            prr[ins] = -2.0 * k * q ** (k - 1.0) + 4.0 * k * (k - 1.0) * x * x * q ** (k - 2.0)
        return p, pr_over, prr

    def sigma(self, z):
        rho = np.abs(np.asarray(z) - self.center) / self.radius
        return 1.0 + self.t * self._p(rho)[0]

    def potential(self, z):
        """v = Δσ^{1/2} / σ^{1/2} in closed form."""
        rho = np.abs(np.asarray(z) - self.center) / self.radius
        p, pr_over, prr = self._p(rho)
        r2 = self.radius ** 2
        S2 = 1.0 + self.t * p
        lap_p = (prr + pr_over) / r2
        grad2 = (pr_over * rho) ** 2 / r2
        return self.t * lap_p / (2.0 * S2) - self.t ** 2 * grad2 / (4.0 * S2 * S2)


@dataclass(frozen=True)
class Conductivity:
    field: ComplexField
    sigma_min: float
    sigma_max: float
    support_radius: float
    background: float = 1.0
    profile: Optional[RadialProfile] = None
    recipe: Optional[dict] = None

    def __post_init__(self):
        vals = self.field.values
        if np.max(np.abs(vals.imag)) > 1e-14:
            raise ValidationError("conductivity values must be real")
        re = vals.real
        if re.min() < self.sigma_min - 1e-12 or re.max() > self.sigma_max + 1e-12:
            raise ValidationError("conductivity outside [sigma_min, sigma_max]")
        if self.sigma_min <= 0:
            raise ValidationError("conductivity must be positive")
        out = np.abs(self.field.grid.nodes()) > self.support_radius
        if np.any(np.abs(re[out] - self.background) > 1e-12):
            raise ValidationError("conductivity not constant outside its support radius")

    @property
    def grid(self):
        return self.field.grid

    def evaluate(self, z):
        """σ at arbitrary points (closed form when known, else interpolation)."""
        if self.profile is not None:
            return self.background * self.profile.sigma(z)
        return interpolate(self.field, z).real


@dataclass(frozen=True)
class Potential:
    field: ComplexField
    m: int
    support_radius: float
    norm_m1: float = float("nan")
    norm_hat_m: float = float("nan")
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    recipe: Optional[dict] = None

    def __post_init__(self):
        vals = self.field.values
        if np.max(np.abs(vals.imag)) > 1e-12:
            raise ValidationError("potential values must be real")
        if self.m <= 2:
            raise ValidationError("smoothness parameter m must exceed 2")
        if not 0 <= self.support_radius < 1:
            raise ValidationError("support radius must lie in [0, 1)")
        if np.any(vals[np.abs(self.field.grid.nodes()) > self.support_radius] != 0):
            raise ValidationError("potential does not vanish outside its support radius")

    @property
    def grid(self):
        return self.field.grid

    def evaluate(self, z):
        if self.func is not None:
            return self.func(z)
        return interpolate(self.field, z).real

    def is_zero(self):
        return not np.any(self.field.values)


def interpolate(fld, z):
    """Cubic-spline interpolation of a field at arbitrary points."""
    from scipy.ndimage import map_coordinates
    g = fld.grid
    z = np.asarray(z, dtype=complex)
    a0 = g.axis[0]
    i1 = (z.real - g.center.real - a0) / g.cell
    i2 = (z.imag - g.center.imag - a0) / g.cell
    coords = np.array([i2.ravel(), i1.ravel()])
    re = map_coordinates(fld.values.real, coords, order=3, mode="nearest")
    im = map_coordinates(fld.values.imag, coords, order=3, mode="nearest")
    return (re + 1j * im).reshape(z.shape)


def _make(kind, t, center, radius, grid, kappa=0.0, m=None):
    grid = DEFAULT_ZGRID if grid is None else grid
    center = complex(center)
    rho_max = abs(center) + radius
    if radius <= 0 or rho_max >= 1.0:
        raise ValidationError(f"phantom leaves the disk: |center| + radius = {rho_max:.4g}")
    if t <= -1.0:
        raise ValidationError("amplitude t must exceed -1")
    if rho_max >= grid.half_width:
        raise ValidationError("phantom support must lie inside the grid")
    prof = RadialProfile(kind, float(t), center, float(radius), float(kappa))
    vals = prof.sigma(grid.nodes())
    recipe = {"type": kind, "t": float(t), "center": [center.real, center.imag],
              "radius": float(radius), "grid": {"s": grid.half_width, "n": grid.n_side,
                                                "offset": grid.offset}}
    if m is not None:
        recipe["m"] = int(m)
    return Conductivity(ComplexField(grid, vals), min(1.0, 1.0 + t), max(1.0, 1.0 + t),
                        rho_max, 1.0, prof, recipe)


def make_radial_bump(t, center=0j, radius=0.5, grid=None):
    """σ = 1 + t exp(1 - 1/(1 - |z-c|²/r²)) inside the bump, 1 outside."""
    return _make("radial_bump", t, center, radius, grid)


def make_radial_power(t, center=0j, radius=0.8, m=3, grid=None):
    """σ = 1 + t (1 - |z-c|²/r²)^{m+1/2}; the potential has |v̂| ~ |p|^{-m}."""
    return _make("radial_power", t, center, radius, kappa=m + 0.5, m=m, grid=grid)


def potential_from_conductivity(sigma, m=4):
    """v = Δσ^{1/2}/σ^{1/2}, with the Laplacian taken spectrally on the grid."""
    vals = sigma.field.values.real
    if vals.min() <= 0:
        raise ValidationError("conductivity touches zero")
    g = sigma.grid
    S = np.sqrt(vals / sigma.background)
    lap = (spectral_derivative(S - 1.0, g, 2, 0) + spectral_derivative(S - 1.0, g, 0, 2)).real
    v = lap / S
    # σ is constant outside its support, so v vanishes there exactly
    if sigma.profile is not None:
        out = np.abs(g.nodes() - sigma.profile.center) >= sigma.profile.radius
    else:
        out = np.abs(g.nodes()) > sigma.support_radius
    v[out] = 0.0
    if np.all(vals == sigma.background):
        v[:] = 0.0
    fld = ComplexField(g, v)
    func = sigma.profile.potential if sigma.profile is not None else None
    if sigma.recipe and "m" in sigma.recipe:
        m = sigma.recipe["m"]
    pot = Potential(fld, m, sigma.support_radius, func=func, recipe=sigma.recipe)
    return Potential(fld, m, sigma.support_radius, norm_w_m1(pot, m), norm_hat_m(pot, m),
                     func, sigma.recipe)


def zero_potential(grid=None, m=4):
    grid = DEFAULT_ZGRID if grid is None else grid
    return Potential(ComplexField(grid, np.zeros((grid.n_side, grid.n_side))), m, 0.0, 0.0, 0.0,
                     func=lambda z: np.zeros(np.shape(z)))


def _values(v):
    return (v.field if isinstance(v, Potential) else v)


def norm_w_m1(v, m):
    """max over |J| ≤ m of the grid L¹ norm of the spectral derivative ∂^J v."""
    if m < 0 or m > MAX_NORM_ORDER:
        raise ValidationError(f"norm order must be in [0, {MAX_NORM_ORDER}]")
    f = _values(v)
    g = f.grid
    vals = f.values
    if not np.any(vals):
        return 0.0
    area = g.cell ** 2
    best = float(np.sum(np.abs(vals)) * area)
    for order in range(1, m + 1):
        for a in range(order + 1):
            d = spectral_derivative(vals, g, a, order - a)
            best = max(best, float(np.sum(np.abs(d)) * area))
    return best


def norm_hat_m(v, m):
    """sup_p (1+|p|²)^{m/2} |v̂(p)| with v̂(p) = (2π)^{-2} ∫ e^{ip·x} v(x) dx.

    On the grid v̂ at the FFT frequencies is cell²/(4π²) times a DFT of the
    samples; the node offset only changes its phase.
    """
    if m < 0:
        raise ValidationError("m must be nonnegative")
    f = _values(v)
    g = f.grid
    xi = 2.0 * np.pi * np.fft.fftfreq(g.n_side, d=g.cell)
    p2 = xi[None, :] ** 2 + xi[:, None] ** 2
    vhat = np.abs(np.fft.fft2(f.values)) * g.cell ** 2 / (4.0 * np.pi ** 2)
    return float(np.max((1.0 + p2) ** (m / 2.0) * vhat))


def phantom_from_recipe(recipe):
    """Build a Conductivity from its JSON recipe."""
    kind = recipe.get("type")
    try:
        g = recipe.get("grid")
        grid = GridSpec(0j, g["s"], g["n"], g.get("offset", True)) if g else None
        center = complex(*recipe.get("center", [0.0, 0.0]))
        if kind == "radial_bump":
            return make_radial_bump(recipe["t"], center, recipe["radius"], grid)
        if kind == "radial_power":
            return make_radial_power(recipe["t"], center, recipe["radius"],
                                     recipe.get("m", 3), grid)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad phantom recipe: {exc}") from exc
    raise ValidationError(f"unknown phantom type {kind!r}")


def load_recipe(path):
    with open(path) as fh:
        return json.load(fh)


def save_recipe(path, recipe):
    with open(path, "w") as fh:
        json.dump(recipe, fh, indent=2, sort_keys=True)
        fh.write("\n")
