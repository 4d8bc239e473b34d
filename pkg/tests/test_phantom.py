import numpy as np
import pytest
import sympy as sp

from calderon.errors import ValidationError
from calderon.grid import ComplexField, GridSpec
from calderon.phantom import Conductivity, Potential, load_recipe, make_radial_bump, \
    make_radial_power, norm_hat_m, norm_w_m1, phantom_from_recipe, potential_from_conductivity, \
    save_recipe, zero_potential

TIGHT = GridSpec(0j, 0.625, 256, True)


def test_bump_trivial_values():
    s = make_radial_bump(0.0, 0j, 0.5)
    assert np.all(s.field.values == 1.0)
    b = make_radial_bump(0.5, 0j, 0.5)
    assert b.evaluate(0.0) == pytest.approx(1.5, abs=1e-15)
    z = b.grid.nodes()
    assert np.all(b.field.values.real[np.abs(z) >= 0.5] == 1.0)


def test_bump_validation():
    with pytest.raises(ValidationError):
        make_radial_bump(0.5, 0.6, 0.5)
    with pytest.raises(ValidationError):
        make_radial_bump(-1.0, 0j, 0.5)
    with pytest.raises(ValidationError):
        make_radial_bump(0.5, 0j, 0.5, grid=GridSpec(0j, 0.4, 64))


def test_bump_gradient_second_order():
    """Centered-difference gradients converge at second order (smooth profile)."""
    t, r = 0.5, 0.5
    errs = []
    for n in (64, 128, 256):
        g = GridSpec(0j, 0.625, n, True)
        s = make_radial_bump(t, 0j, r, grid=g).field.values.real
        gx = (s[1:-1, 2:] - s[1:-1, :-2]) / (2 * g.cell)
        z = g.nodes()[1:-1, 1:-1]
        rho = np.abs(z) / r
        q = 1 - rho ** 2
        exact = np.where(rho < 1, t * np.exp(1 - 1 / np.where(rho < 1, q, 1)) * (-2 / np.where(rho < 1, q, 1) ** 2) * z.real / r ** 2, 0)
        errs.append(np.max(np.abs(gx - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.7)


def test_potential_trivial_cases():
    s1 = make_radial_bump(0.0, 0j, 0.5)
    assert potential_from_conductivity(s1).is_zero()
    b = make_radial_bump(0.3, 0.1j, 0.4)
    v = potential_from_conductivity(b)
    c = 2.7
    scaled = Conductivity(ComplexField(b.grid, c * b.field.values), c * b.sigma_min,
                          c * b.sigma_max, b.support_radius, background=c, profile=b.profile)
    vs = potential_from_conductivity(scaled)
    assert np.max(np.abs(vs.field.values - v.field.values)) < 1e-10


def _sympy_bump_potential(t, r):
    x = sp.symbols("x", nonnegative=True)
    S = sp.sqrt(1 + t * sp.exp(1 - 1 / (1 - x ** 2 / r ** 2)))
    lap = sp.diff(S, x, 2) + sp.diff(S, x) / x
    return sp.lambdify(x, lap / S, "numpy")


def test_potential_matches_symbolic_oracle():
    """Spectral v on a grid that resolves the bump against sympy differentiation."""
    b = make_radial_bump(0.5, 0j, 0.5, grid=TIGHT)
    v = potential_from_conductivity(b)
    f = _sympy_bump_potential(sp.Rational(1, 2), sp.Rational(1, 2))
    rho = np.abs(TIGHT.nodes())
    ins = rho < 0.5
    with np.errstate(all="ignore"):
        ref = np.where(ins, f(np.where(ins, rho, 0.1)), 0.0)
    assert np.max(np.abs(v.field.values.real - ref)) <= 1e-3
    # the closed form used off the grid agrees with sympy to round-off
    assert np.max(np.abs(v.evaluate(TIGHT.nodes()) - ref)) < 1e-9


def test_potential_support_and_reality(bump_v, bump):
    z = bump_v.grid.nodes()
    assert np.all(bump_v.field.values[np.abs(z) >= 0.5] == 0)
    assert np.all(bump_v.field.values.imag == 0)
    with pytest.raises(ValidationError):
        Potential(ComplexField(bump.grid, np.ones((256, 256))), 4, 0.5)
    with pytest.raises(ValidationError):
        Potential(ComplexField(bump.grid, np.zeros((256, 256))), 2, 0.5)


def test_norm_w_m1_trivial():
    g = GridSpec(0j, 1.0, 32, True)
    assert norm_w_m1(zero_potential(g), 3) == 0.0
    vals = np.zeros((32, 32))
    vals[16, 16] = 1.0
    v = Potential(ComplexField(g, vals), 4, 0.1)
    assert norm_w_m1(v, 0) == pytest.approx(g.cell ** 2, rel=1e-14)


def test_norm_w_m1_against_dense_finite_differences():
    """m = 3 norm versus sixth-order finite differences on a 2× denser grid."""
    b = make_radial_bump(0.5, 0j, 0.8, grid=GridSpec(0j, 1.0, 512, True))
    v = potential_from_conductivity(b)
    spec = norm_w_m1(v, 3)
    gd = GridSpec(0j, 1.0, 1024, True)
    vd = b.profile.potential(gd.nodes())
    h = gd.cell

    def d1(a, axis):
        c = [1 / 60, -3 / 20, 3 / 4, 0, -3 / 4, 3 / 20, -1 / 60]
        return sum(ck * np.roll(a, k - 3, axis=axis) for k, ck in enumerate(c)) / h

    best = np.sum(np.abs(vd)) * h * h
    derivs = {(0, 0): vd}
    for order in range(1, 4):
        for a in range(order + 1):
            b_ = order - a
            prev = derivs[(a - 1, b_)] if a > 0 else derivs[(a, b_ - 1)]
            cur = d1(prev, 1) if a > 0 else d1(prev, 0)
            derivs[(a, b_)] = cur
            best = max(best, np.sum(np.abs(cur)) * h * h)
    assert abs(spec - best) <= 1e-2 * best


def test_norm_hat_gaussian_and_shift():
    g = GridSpec(0j, 12.0, 256, True)
    z = g.nodes()
    gauss = np.exp(-np.abs(z) ** 2 / 2)
    # the Gaussian is not compactly supported, so the bare field is passed
    v = ComplexField(g, gauss)
    assert norm_hat_m(v, 0) == pytest.approx(1 / (2 * np.pi), abs=1e-3)
    shifted = ComplexField(g, np.roll(gauss, (5, -7), axis=(0, 1)))
    assert abs(norm_hat_m(shifted, 3) - norm_hat_m(v, 3)) <= 1e-10 * norm_hat_m(v, 3)
    assert norm_hat_m(zero_potential(), 4) == 0.0


def test_norm_hat_monotone_in_m(bump_v):
    vals = [norm_hat_m(bump_v, m) for m in range(0, 7)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_norm_order_cap(bump_v):
    with pytest.raises(ValidationError):
        norm_w_m1(bump_v, 9)


def test_recipe_round_trip(tmp_path):
    p = make_radial_power(0.4, 0.1 - 0.05j, 0.6, m=4)
    path = tmp_path / "p.json"
    save_recipe(path, p.recipe)
    q = phantom_from_recipe(load_recipe(path))
    assert np.array_equal(q.field.values, p.field.values)
    assert q.recipe == p.recipe
    with pytest.raises(ValidationError):
        phantom_from_recipe({"type": "square", "t": 1})
    with pytest.raises(ValidationError):
        phantom_from_recipe({"type": "radial_bump"})


def test_radial_power_potential_closed_form():
    p = make_radial_power(0.5, 0j, 0.8, m=3, grid=GridSpec(0j, 1.0, 256, True))
    x = sp.symbols("x", nonnegative=True)
    S = sp.sqrt(1 + sp.Rational(1, 2) * (1 - x ** 2 / sp.Rational(16, 25)) ** sp.Rational(7, 2))
    f = sp.lambdify(x, (sp.diff(S, x, 2) + sp.diff(S, x) / x) / S, "numpy")
    rr = np.linspace(0.05, 0.79, 50)
    assert np.allclose(p.profile.potential(rr + 0j), f(rr), atol=1e-12)
