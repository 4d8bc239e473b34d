import os
import subprocess
import sys

import mpmath
import numpy as np
import pytest
from scipy.linalg import solve_banded

from calderon import _pykernels, kernels

try:
    from calderon import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


def _mp_scaled_exp1(u):
    u = mpmath.mpc(u.real, u.imag)
    return complex(mpmath.exp(u) * mpmath.e1(u))


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_scaled_exp1_against_mpmath(mod, rng):
    mpmath.mp.dps = 30
    pts = np.concatenate([
        rng.uniform(-6, 6, 40) + 1j * rng.uniform(-6, 6, 40),
        rng.uniform(-60, 60, 40) + 1j * rng.uniform(-60, 60, 40),
        np.array([1e-6 + 0j, -3 + 1e-9j, -30 + 0.5j, 0.5j, 200 - 100j, -45 - 2j]),
    ])
    got = mod.scaled_exp1(pts)
    ref = np.array([_mp_scaled_exp1(u) for u in pts])
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-10


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_tridiag_solve_against_banded(mod, rng):
    m, n = 5, 40
    lower = rng.uniform(0.5, 1, (m, n))
    upper = rng.uniform(0.5, 1, (m, n))
    diag = -4 + rng.uniform(-0.1, 0.1, (m, n))
    rhs = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    fact = _pykernels.tridiag_factor(lower, diag, upper)
    got = mod.tridiag_solve(*fact, rhs)
    for i in range(m):
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[i, :-1]
        ab[1] = diag[i]
        ab[2, :-1] = lower[i, 1:]
        assert np.allclose(got[i], solve_banded((1, 1), ab, rhs[i]), rtol=1e-12, atol=1e-13)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree(rng):
    u = rng.uniform(-40, 40, (64, 64)) + 1j * rng.uniform(-40, 40, (64, 64))
    a, b = _pykernels.scaled_exp1(u), _ckernels.scaled_exp1(u)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-10


def test_fallback_selected_by_environment():
    env = dict(os.environ, CALDERON_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import calderon; print(calderon.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
