"""FFT convolutions with the Cauchy and Faddeev kernels, and ∂̄ residuals.

Fourier convention: f̂(ξ) = ∫ f(x) e^{-iξ·x} dx, so ∂_j ↔ iξ_j and
∂̄ = (∂_1 + i∂_2)/2 ↔ iζ/2 with ζ = ξ_1 + iξ_2.

Both convolutions zero-pad the n×n grid to 2n×2n and use a kernel that is
truncated near radius 2s, so the periodic convolution is exact (up to
quadrature of the input) for all source/target pairs in the original
grid.  The Cauchy kernel 1/(πz) and the log kernel are truncated sharply
because their truncated transforms are known in closed form.  The Faddeev
kernel g_λ is truncated with a smooth erfc window χ; the transform of χg_λ is
(1 + ρ̂)/q with ρ = L(χg_λ) - δ supported where χ' ≠ 0, and
q(ξ) = |ξ|² + 2λζ the symbol of L = -Δ - 4iλ∂̄.  That transform is sampled on
a lattice shifted by half a frequency cell so the zeros of q (ξ = 0 and
ζ = -2λ̄) are never nodes.
"""
from functools import lru_cache

import numpy as np
from scipy.special import erfc, j0, j1

from . import kernels
from .errors import SingularNodeError, ValidationError
from .grid import ComplexField

EULER = 0.57721566490153286061


def _padded_lattice(n, cell):
    """Node displacements (fft order) and angular frequencies of the 2n lattice."""
    N = 2 * n
    x = np.fft.fftfreq(N, d=1.0 / (N * cell))
    xi = 2.0 * np.pi * np.fft.fftfreq(N, d=cell)
    return x, xi


@lru_cache(maxsize=8)
def _cauchy_symbol(n, s):
    _, xi = _padded_lattice(n, 2.0 * s / n)
    x1 = xi[None, :]
    x2 = xi[:, None]
    zeta = x1 + 1j * x2
    k = np.abs(zeta)
    R = 2.0 * s
    out = np.zeros_like(zeta)
    nz = k > 0
    out[nz] = 2.0 * (1.0 - j0(R * k[nz])) / (1j * zeta[nz])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4)
def _log_symbol(n, s):
    """Transform of -(1/2π) log|x| truncated to |x| < 2s."""
    _, xi = _padded_lattice(n, 2.0 * s / n)
    k = np.hypot(xi[None, :], xi[:, None])
    R = 2.0 * s
    out = np.empty_like(k)
    nz = k > 0
    kr = k[nz] * R
    out[nz] = (1.0 - j0(kr)) / k[nz] ** 2 - R * np.log(R) * j1(kr) / k[nz]
    out[~nz] = R * R / 4.0 - R * R * np.log(R) / 2.0
    out.setflags(write=False)
    return out + 0j


def _pad_convolve(values, symbol, shift=None):
    """Periodic convolution on the 2n padded lattice, cropped to n×n."""
    n = values.shape[0]
    pad = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    pad[:n, :n] = values
    if shift is not None:
        pad *= shift
        out = np.fft.ifft2(np.fft.fft2(pad) * symbol)
        return out[:n, :n] * np.conj(shift[:n, :n])
    return np.fft.ifft2(np.fft.fft2(pad) * symbol)[:n, :n]


def solid_cauchy(f):
    """(1/π) ∫ f(w)/(z - w) dA(w), so that ∂̄ of the result is f.

    Exact (beyond the trapezoid rule for f) at every node whose distance
    to supp f is at most 2s; inputs supported within s/2 of the grid center
    satisfy this everywhere on the grid.
    """
    g = f.grid
    if g.n_side < 8:
        raise ValidationError("grid too small to zero-pad")
    sym = _cauchy_symbol(g.n_side, g.half_width)
    return f.with_values(_pad_convolve(f.values, sym))


def log_convolve(f):
    """Convolution with the Laplacian fundamental solution -(1/2π) log|z|."""
    g = f.grid
    sym = _log_symbol(g.n_side, g.half_width)
    return f.with_values(_pad_convolve(f.values, sym))


# ---------------------------------------------------------------------------
# Faddeev Green's function

def faddeev_green(lam, z):
    """g_λ(z), the fundamental solution of -Δ - 4iλ∂̄, with its z-derivatives.

    With u = -iλz and F(u) = e^u E1(u),
        g = (F(u) + e^{u-ū} conj F(u)) / 4π,
    which behaves like -(1/2π) log|z| at the origin and like 1/|λz| at
    infinity.  Returns (g, ∂g, ∂̄g).  λ = 0 gives the log kernel.
    """
    lam = complex(lam)
    z = np.asarray(z, dtype=np.complex128)
    if lam == 0:
        g = -np.log(np.abs(z)) / (2 * np.pi)
        return g + 0j, -1.0 / (4 * np.pi * z), -1.0 / (4 * np.pi * np.conj(z))
    u = -1j * lam * z
    F = kernels.scaled_exp1(u)
    phase = np.exp(2j * u.imag)
    G2 = phase * np.conj(F)
    g = (F + G2) / (4 * np.pi)
    dg = -1j * lam * (F - 1.0 / u + G2) / (4 * np.pi)
    dbg = -1j * np.conj(lam) * phase / np.conj(u) / (4 * np.pi)
    return g, dg, dbg


def faddeev_symbol(lam, xi1, xi2):
    """q(ξ) = |ξ|² + 2λζ, the symbol of -Δ - 4iλ∂̄."""
    return xi1 ** 2 + xi2 ** 2 + 2.0 * complex(lam) * (xi1 + 1j * xi2)


def _window_params(n, s):
    cell = 2.0 * s / n
    w = 4.0 * cell
    if 2.0 * s - 12.0 * w < s:
        w = s / 12.0
    return 2.0 * s - 6.0 * w, w


def exact_radius(n, s):
    """Displacement radius within which the windowed Faddeev kernel is exact."""
    rm, w = _window_params(n, s)
    return rm - 6.0 * w


def check_collision(lam, n, s, offset):
    """Raise SingularNodeError if a frequency node sits on a zero of q."""
    if not offset:
        raise SingularNodeError(
            "the frequency node ξ = 0 is a zero of the Faddeev symbol; "
            "enable the grid offset", module="field-core", stage="faddeev_symbol")
    dxi = 2.0 * np.pi / (2 * n * 2.0 * s / n)
    zero = np.array([-2.0 * lam.real, 2.0 * lam.imag]) / dxi - 0.5
    if np.all(np.abs(zero - np.round(zero)) < 1e-6):
        raise SingularNodeError(
            f"frequency node hits the characteristic point ζ = -2λ̄ for λ = {lam}; "
            "change the grid or enable the grid offset",
            module="field-core", stage="faddeev_symbol")


@lru_cache(maxsize=16)
def _faddeev_symbol_cached(lam, n, s):
    cell = 2.0 * s / n
    N = 2 * n
    x, xi = _padded_lattice(n, cell)
    eta = np.pi / (N * cell)
    X1 = x[None, :]
    X2 = x[:, None]
    r = np.hypot(X1, X2)
    rm, w = _window_params(n, s)
    band = np.abs(r - rm) < 6.0 * w
    zb = (X1 + 1j * X2)[band]
    rb = r[band]
    t = (rb - rm) / w
    chi = 0.5 * erfc(t)
    d1 = -np.exp(-t * t) / (w * np.sqrt(np.pi))
    d2 = -d1 * 2.0 * t / w
    lap_chi = d2 + d1 / rb
    dbar_chi = d1 * zb / (2.0 * rb)
    d_chi = np.conj(dbar_chi)
    g, dg, dbg = faddeev_green(lam, zb)
    grad_dot = 2.0 * (dg * dbar_chi + dbg * d_chi)
    rho = np.zeros((N, N), dtype=np.complex128)
    rho[band] = -g * lap_chi - 2.0 * grad_dot - 4j * lam * g * dbar_chi
    del chi
    shift = np.exp(-1j * eta * (X1 + X2))
    rho_hat = cell * cell * np.fft.fft2(rho * shift)
    q = faddeev_symbol(lam, xi[None, :] + eta, xi[:, None] + eta)
    sym = (1.0 + rho_hat) / q
    j = np.arange(N) * cell
    mod = np.exp(-1j * eta * (j[None, :] + j[:, None]))
    sym.setflags(write=False)
    mod.setflags(write=False)
    return sym, mod


class FaddeevKernel:
    """Reusable apply of g_λ∗ on a fixed (n, s) grid."""

    def __init__(self, lam, grid):
        self.lam = complex(lam)
        self.grid = grid
        n, s = grid.n_side, grid.half_width
        if self.lam == 0:
            self._sym = _log_symbol(n, s)
            self._mod = None
        else:
            check_collision(self.lam, n, s, grid.offset)
            self._sym, self._mod = _faddeev_symbol_cached(self.lam, n, s)

    def apply(self, values):
        return _pad_convolve(np.asarray(values).reshape(self.grid.n_side, -1),
                             self._sym, self._mod)


def faddeev_convolve(lam, f):
    """g_λ ∗ f for f compactly supported in the grid (see module notes)."""
    return f.with_values(FaddeevKernel(lam, f.grid).apply(f.values))


# ---------------------------------------------------------------------------
# differentiation and residual instruments

def spectral_frequencies(grid):
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.n_side, d=grid.cell)
    return xi[None, :], xi[:, None]


def spectral_derivative(values, grid, order1=0, order2=0):
    """∂_1^a ∂_2^b of periodic samples by FFT (Nyquist mode dropped for odd orders)."""
    xi1, xi2 = spectral_frequencies(grid)
    n = grid.n_side
    sym = (1j * xi1) ** order1 * (1j * xi2) ** order2
    if (order1 % 2) or (order2 % 2):
        sym = sym.copy() * np.ones((n, n))
        if order1 % 2:
            sym[:, n // 2] = 0
        if order2 % 2:
            sym[n // 2, :] = 0
    return np.fft.ifft2(np.fft.fft2(values) * sym)


def faddeev_operator(lam, values, grid):
    """Spectral apply of -Δ - 4iλ∂̄ to periodic samples."""
    xi1, xi2 = spectral_frequencies(grid)
    n = grid.n_side
    o1, o2 = xi1.copy(), xi2.copy()
    o1[:, n // 2] = 0
    o2[n // 2, :] = 0
    q = xi1 ** 2 + xi2 ** 2 + 2.0 * complex(lam) * (o1 + 1j * o2)
    return np.fft.ifft2(np.fft.fft2(values) * q)


def dbar_fd(values, cell):
    """Centered-difference ∂̄ = (∂_1 + i∂_2)/2 on interior nodes (border dropped)."""
    v = np.asarray(values)
    d1 = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * cell)
    d2 = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * cell)
    return 0.5 * (d1 + 1j * d2)


def dbar_residual(f, rhs):
    """max over interior nodes of |D̄f - rhs| with centered differences."""
    if f.grid != rhs.grid:
        raise ValidationError("dbar_residual: grid mismatch")
    r = dbar_fd(f.values, f.grid.cell) - rhs.values[1:-1, 1:-1]
    return float(np.max(np.abs(r)))
