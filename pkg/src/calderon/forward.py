"""Dirichlet-to-Neumann maps of the unit disk on a polar grid.

Radial nodes r_i = (i - 1/2)Δr, i = 1..N_r, with Δr = 2/(2N_r + 1) so the
boundary node r_{N_r+1} is exactly 1 and the pole needs no node (the flux
through r = 0 vanishes).  The radial operator is the conservative
second-order stencil; the angular direction is treated spectrally.  The
normal derivative at r = 1 is obtained from a flux balance over the last
half cell:

    (r σ u_r)(1) = (r σ u_r)(r_{N+1/2}) + ∫_{r_{N+1/2}}^1 (r v u - (1/r)(σ u_θ)_θ) dr,

with the integral by the trapezoid rule (v ≡ 0 and σ ≡ 1 there in practice).

Each column is solved by GMRES on the second-kind system
u + P⁻¹(A - P)u = P⁻¹b, where P is the same operator with the coefficients
replaced by their ring averages.  P is diagonal in the angular Fourier
index and tridiagonal in r, so it is inverted exactly; for centered radial
phantoms it equals A and GMRES stops after one step.
"""
import struct
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.sparse.linalg import LinearOperator, gmres

from . import kernels
from .errors import ConvergenceError, DirichletEigenvalueError, ValidationError
from .parallel import pmap

BOP_MAGIC = b"BOP1\0"
KIND_BYTES = {"phi": b"P", "lambda": b"L"}
COND_THRESHOLD = 1e12


@dataclass(frozen=True)
class BoundaryOperator:
    """A_{jk} = coefficient of e^{ijθ} in the image of e^{ikθ}, |j|,|k| ≤ N_b."""

    matrix: np.ndarray
    n_modes: int
    kind: str = "phi"

    def __post_init__(self):
        M = np.array(self.matrix, dtype=np.complex128)
        d = 2 * self.n_modes + 1
        if M.shape != (d, d):
            raise ValidationError(f"matrix must be {d}x{d}, got {M.shape}")
        if self.kind not in KIND_BYTES:
            raise ValidationError(f"kind must be 'phi' or 'lambda', got {self.kind!r}")
        if not np.all(np.isfinite(M)):
            raise ValidationError("operator has non-finite entries")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def modes(self):
        return np.arange(-self.n_modes, self.n_modes + 1)

    def entry(self, j, k):
        return self.matrix[j + self.n_modes, k + self.n_modes]

    def realness_defect(self):
        """max |A_{-j,-k} - conj A_{jk}|."""
        return float(np.max(np.abs(self.matrix[::-1, ::-1] - np.conj(self.matrix))))

    def symmetry_defect(self):
        """max |A_{jk} - A_{-k,-j}|: self-adjointness in the L² pairing with real data.

        For the DtN map of a real coefficient ∫ ū Λ w = ∫ w Λū, which in this basis
        reads A_{jk} = A_{-k,-j}.
        """
        return float(np.max(np.abs(self.matrix - self.matrix[::-1, ::-1].T)))


def write_bop(path, op):
    head = BOP_MAGIC + struct.pack("<I", op.n_modes) + KIND_BYTES[op.kind]
    with open(path, "wb") as fh:
        fh.write(head + np.ascontiguousarray(op.matrix, dtype="<c16").tobytes())


def read_bop(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(BOP_MAGIC):
        raise ValidationError(f"{path}: not a BOP1 file")
    off = len(BOP_MAGIC)
    (nb,) = struct.unpack_from("<I", data, off)
    kind_b = data[off + 4:off + 5]
    kinds = {v: k for k, v in KIND_BYTES.items()}
    if kind_b not in kinds:
        raise ValidationError(f"{path}: unknown operator kind {kind_b!r}")
    d = 2 * nb + 1
    off += 5
    if len(data) != off + 16 * d * d:
        raise ValidationError(f"{path}: truncated or oversized BOP1 payload")
    M = np.frombuffer(data, dtype="<c16", offset=off).reshape(d, d)
    return BoundaryOperator(M, nb, kinds[kind_b])


# ---------------------------------------------------------------------------
# polar discretization

class PolarProblem:
    """Discrete -div(σ∇u) + v u = 0 on the unit disk with Dirichlet data."""

    def __init__(self, n_r, n_theta, sigma=None, v=None):
        if n_theta % 2:
            raise ValidationError("n_theta must be even")
        self.n_r, self.n_theta = n_r, n_theta
        dr = 2.0 / (2 * n_r + 1)
        self.dr = dr
        self.r = (np.arange(1, n_r + 1) - 0.5) * dr
        self.r_half = np.arange(0, n_r + 1) * dr          # r_{i-1/2}, i = 1..N_r+1
        self.theta = 2 * np.pi * np.arange(n_theta) / n_theta
        self.m = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
        dm = self.m.copy()
        dm[n_theta // 2] = 0.0
        self._dtheta = 1j * dm
        ct, st = np.cos(self.theta), np.sin(self.theta)
        z = self.r[:, None] * (ct + 1j * st)[None, :]
        zh = self.r_half[1:, None] * (ct + 1j * st)[None, :]
        self.sigma_node = sigma(z) if sigma is not None else None
        self.sigma_half = sigma(zh) if sigma is not None else None   # r_{i+1/2}
        self.v = v(z) if v is not None else None
        self._build_preconditioner()

    # ring-averaged operator, exact per angular mode
    def _tridiagonal(self):
        r, rh, dr = self.r, self.r_half, self.dr
        n = self.n_r
        s_h = (self.sigma_half.mean(axis=1) if self.sigma_half is not None
               else np.ones(n))
        s_n = (self.sigma_node.mean(axis=1) if self.sigma_node is not None
               else np.ones(n))
        v_n = self.v.mean(axis=1) if self.v is not None else np.zeros(n)
        out_c = rh[1:] * s_h                      # r_{i+1/2} σ_{i+1/2}
        in_c = np.concatenate([[0.0], out_c[:-1]])  # r_{i-1/2} σ_{i-1/2}
        lower = -in_c / (r * dr * dr)
        upper = -out_c / (r * dr * dr)
        base = (in_c + out_c) / (r * dr * dr) + v_n
        ang = (self.m ** 2 if self.sigma_node is None
               else (np.imag(self._dtheta)) ** 2)
        diag = base[None, :] + (s_n / r ** 2)[None, :] * ang[:, None]
        M = self.n_theta
        return (np.broadcast_to(lower, (M, n)).copy(), diag,
                np.broadcast_to(upper, (M, n)).copy(), s_h, s_n, v_n)

    def _build_preconditioner(self):
        lower, diag, upper, s_h, s_n, v_n = self._tridiagonal()
        self._p_lower, self._p_diag, self._p_upper = lower, diag, upper
        self._ring = (s_h, s_n, v_n)
        self._fact = kernels.tridiag_factor(lower, diag, upper)
        self.condition = self._condition_estimate(lower, diag, upper)

    def _condition_estimate(self, lower, diag, upper):
        # row i scaled by r_i is symmetric; its eigenvalues match the
        # congruent matrix R^{-1/2} S R^{-1/2}
        r = self.r
        worst = 1.0
        for k in range(diag.shape[0]):
            off = lower[k, 1:] * r[1:] / np.sqrt(r[1:] * r[:-1])
            ev = eigvalsh_tridiagonal(diag[k], off)
            lo = np.min(np.abs(ev))
            if lo == 0:
                return np.inf
            worst = max(worst, np.max(np.abs(ev)) / lo)
        return worst

    def precondition(self, res):
        """Apply P⁻¹ to a (n_r, n_theta) array."""
        rhat = np.fft.fft(res, axis=1)
        sol = kernels.tridiag_solve(*self._fact, np.ascontiguousarray(rhat.T))
        return np.fft.ifft(sol.T, axis=1)

    def _dth(self, u):
        return np.fft.ifft(self._dtheta * np.fft.fft(u, axis=-1), axis=-1)

    def apply_residual_part(self, u):
        """(A - P) u, without boundary contributions (they cancel)."""
        out = np.zeros_like(u)
        if self.v is not None:
            out += (self.v - self._ring[2][:, None]) * u
        if self.sigma_node is not None:
            r, rh, dr = self.r, self.r_half, self.dr
            ds_h = self.sigma_half - self._ring[0][:, None]
            up = np.zeros_like(u)
            up[:-1] = u[1:]
            flux_out = rh[1:, None] * ds_h * (up - u)
            flux_out[-1] = rh[-1] * ds_h[-1] * (0.0 - u[-1])
            flux_in = np.zeros_like(u)
            flux_in[1:] = flux_out[:-1]
            out += -(flux_out - flux_in) / (r[:, None] * dr * dr)
            ds_n = self.sigma_node - self._ring[1][:, None]
            out += -self._dth(ds_n * self._dth(u)) / r[:, None] ** 2
        return out

    def solve(self, k, tol=1e-11, maxiter=200):
        """Interior solution for boundary data e^{ikθ}; returns (u, boundary)."""
        n, M = self.n_r, self.n_theta
        g = np.exp(1j * k * self.theta)
        rh, r, dr = self.r_half, self.r, self.dr
        s_b = self.sigma_half[-1] if self.sigma_half is not None else 1.0
        b = np.zeros((n, M), dtype=np.complex128)
        b[-1] = rh[-1] * s_b * g / (r[-1] * dr * dr)
        rhs = self.precondition(b)
        if self.v is None and self.sigma_node is None:
            return rhs, g
        vr = self.v is not None and np.ptp(self.v, axis=1).max() == 0
        sr = self.sigma_node is not None and np.ptp(self.sigma_node, axis=1).max() == 0 \
            and np.ptp(self.sigma_half, axis=1).max() == 0
        if (self.v is None or vr) and (self.sigma_node is None or sr):
            return rhs, g

        def mv(x):
            u = x.reshape(n, M)
            return (u + self.precondition(self.apply_residual_part(u))).ravel()

        op = LinearOperator((n * M, n * M), matvec=mv, dtype=np.complex128)
        x, info = gmres(op, rhs.ravel(), x0=rhs.ravel(), rtol=tol, atol=0.0,
                        restart=50, maxiter=maxiter)
        if info != 0:
            res = np.linalg.norm(mv(x) - rhs.ravel()) / np.linalg.norm(rhs)
            raise ConvergenceError(f"GMRES did not converge for boundary mode {k} "
                                   f"(relative residual {res:.3g})",
                                   module="forward", stage="column_solve", k=k)
        return x.reshape(n, M), g

    def normal_flux(self, u, g, extraction="flux"):
        """σ ∂_r u at r = 1 (θ samples).

        ``flux`` uses the half-cell balance described in the module notes;
        ``one-sided`` is the plain second-order stencil (3u_{N+1} - 4u_N + u_{N-1})/2Δr.
        """
        rh, dr = self.r_half[-1], self.dr
        if extraction == "one-sided":
            s1 = 1.0 if self.sigma_half is None else self.sigma_half[-1]
            return s1 * (3.0 * g - 4.0 * u[-1] + u[-2]) / (2.0 * dr)
        uN = u[-1]
        uh = 0.5 * (uN + g)
        s_h = self.sigma_half[-1] if self.sigma_half is not None else 1.0
        flux = rh * s_h * (g - uN) / dr
        # boundary-layer integrand  r v u - (1/r)(σ u_θ)_θ  at r = 1 and r = r_{N+1/2}
        s1 = 1.0 if self.sigma_half is None else s_h
        f1 = -self._dth(s1 * self._dth(g))
        fh = -self._dth(s_h * self._dth(uh)) / rh
        if self.v is not None:
            fh = fh + rh * self.v[-1] * uh
        return flux + 0.25 * dr * (f1 + fh)


def _column(problem, nb, extraction, k):
    u, g = problem.solve(k)
    flux = problem.normal_flux(u, g, extraction)
    c = np.fft.fft(flux) / problem.n_theta
    return c[np.arange(-nb, nb + 1) % problem.n_theta]


def _assemble(problem, nb, kind, jobs, extraction):
    if extraction not in ("flux", "one-sided"):
        raise ValidationError(f"unknown Neumann extraction {extraction!r}")
    if problem.condition > COND_THRESHOLD:
        raise DirichletEigenvalueError(
            f"condition estimate {problem.condition:.3g} exceeds {COND_THRESHOLD:g}: "
            "0 appears to be a Dirichlet eigenvalue", module="forward", stage="assemble")
    cols = pmap(partial(_column, problem, nb, extraction), list(range(-nb, nb + 1)), jobs)
    return BoundaryOperator(np.array(cols).T, nb, kind)


def _check_res(nb, n_r, n_theta):
    if nb < 0:
        raise ValidationError("N_b must be nonnegative")
    if n_r < 4 * nb or n_theta < 4 * nb or n_theta < 8:
        raise ValidationError("polar resolution must satisfy N_r, N_theta >= 4 N_b")


def dtn_schrodinger(v, nb, n_r=256, n_theta=256, jobs=1, extraction="flux"):
    """Φ for -Δ + v on the unit disk in the Fourier basis |k| ≤ N_b."""
    _check_res(nb, n_r, n_theta)
    vf = None if (v is None or v.is_zero()) else v.evaluate
    return _assemble(PolarProblem(n_r, n_theta, v=vf), nb, "phi", jobs, extraction)


def dtn_conductivity(sigma, nb, n_r=256, n_theta=256, jobs=1, extraction="flux"):
    """Λ for div(σ∇u) = 0 on the unit disk, conservative discretization."""
    _check_res(nb, n_r, n_theta)
    sf = None
    if sigma is not None and np.ptp(sigma.field.values.real) > 0:
        sf = sigma.evaluate
    return _assemble(PolarProblem(n_r, n_theta, sigma=sf), nb, "lambda", jobs, extraction)


def laplace_dtn(nb):
    """Exact DtN map of the Laplacian, diag(|k|)."""
    return BoundaryOperator(np.diag(np.abs(np.arange(-nb, nb + 1))).astype(complex), nb, "phi")


def op_norm_h12_hm12(A, B):
    """‖A - B‖ from H^{1/2}(∂D) to H^{-1/2}(∂D) with weights (1+k²)^{±1/4}."""
    if A.n_modes != B.n_modes:
        raise ValidationError("operators have different numbers of modes")
    w = (1.0 + A.modes.astype(float) ** 2) ** -0.25
    D = w[:, None] * (A.matrix - B.matrix) * w[None, :]
    return float(np.linalg.norm(D, 2))
