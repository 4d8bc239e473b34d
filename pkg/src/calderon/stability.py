"""Desk-scale experiments on the decay and stability estimates.

Errors are compared with moduli ω(δ) = C (log(3 + 1/δ))^{-α}.  Bounds are
tested one-sided: with α fixed, C_min = max_i err_i L_i^α is the smallest
constant making the bound hold, C_fit = exp(mean log(err_i L_i^α)) the
least-squares constant, and the bound form holds when C_min ≤ slack·C_fit.
"""
import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Dict, Optional, Tuple

import numpy as np

from .cache import cached_dtn
from .dbar import DEFAULT_TOL, DIFF_STEP, point_data
from .errors import NumericalError, ValidationError
from .faddeev import ScatteringAmplitude, scattering_grid
from .forward import BoundaryOperator, op_norm_h12_hm12
from .grid import ComplexField, GridSpec
from .parallel import pmap
from .phantom import norm_w_m1, phantom_from_recipe, potential_from_conductivity

P_VALUES = (4.0 / 3.0, 2.0, 4.0)
SLACK = 100.0
R2_FLAG = 0.8


@dataclass(frozen=True)
class StabilityConfig:
    m: int = 4
    nb: int = 16
    n_r: int = 128
    n_theta: int = 128
    lambda_max: float = 8.0
    n_lambda: int = 64
    z_side: int = 16
    tol: float = DEFAULT_TOL
    step: float = DIFF_STEP
    p_values: Tuple[float, ...] = P_VALUES
    slack: float = SLACK
    sigma_alpha: Optional[float] = None
    seed: int = 0

    @property
    def lambda_grid(self):
        return GridSpec(0j, self.lambda_max, self.n_lambda, True)

    @property
    def probe_points(self):
        z = GridSpec(0j, 1.0, self.z_side, True).nodes()
        return z[np.abs(z) < 1.0]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "p_values" in d:
            d["p_values"] = tuple(float(p) for p in d["p_values"])
        return cls(**d)


@dataclass(frozen=True)
class ExperimentRecord:
    ids: Tuple[str, str]
    m: int
    N: float
    delta: float
    err_v_sup: float
    err_sigma_sup: float
    err_h_lp: Dict[str, Dict[str, float]]
    err_mu0_sup: float
    err_mu_l4: float
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = [self.N, self.delta, self.err_v_sup, self.err_sigma_sup, self.err_mu0_sup,
                self.err_mu_l4]
        vals += [x for d in self.err_h_lp.values() for x in d.values()]
        if not all(np.isfinite(x) and x >= 0 for x in vals):
            raise ValidationError("record entries must be finite and nonnegative")
        if self.ids[0] != self.ids[1] and self.delta <= 0:
            raise ValidationError("distinct phantoms with delta = 0")

    def to_json(self):
        d = asdict(self)
        d["ids"] = list(self.ids)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        d["ids"] = tuple(d["ids"])
        return cls(**d)


@dataclass(frozen=True)
class FitResult:
    C: float
    alpha: float
    r_squared: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 4 or not np.isfinite(self.alpha):
            raise ValidationError("fit needs at least 4 points and a finite exponent")

    @property
    def flagged(self):
        return self.r_squared < R2_FLAG


def phantom_id(recipe):
    if recipe is None:
        return "sigma=1"
    c = recipe.get("center", [0.0, 0.0])
    extra = f",m={recipe['m']}" if "m" in recipe else ""
    return (f"{recipe['type']}(t={recipe['t']:.6g},r={recipe['radius']:.6g},"
            f"c={c[0]:.6g}{c[1]:+.6g}i{extra})")


def loglog_term(delta):
    return np.log(3.0 + 1.0 / np.asarray(delta, dtype=float))


def fit_arrays(delta, err):
    """Least squares of log err = log C - α log log(3 + 1/δ)."""
    delta = np.asarray(delta, dtype=float)
    err = np.asarray(err, dtype=float)
    if delta.size < 4:
        raise ValidationError("fit needs at least 4 records")
    if np.any(delta <= 0) or np.any(err <= 0):
        raise ValidationError("fit needs positive δ and errors")
    if np.log10(delta.max() / delta.min()) < 2.0 - 1e-9:
        raise ValidationError("δ must span at least two decades")
    x = np.log(loglog_term(delta))
    y = np.log(err)
    A = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return FitResult(float(np.exp(coef[0])), float(coef[1]), r2, int(delta.size))


def _get(rec, key):
    if isinstance(rec, ExperimentRecord):
        rec = asdict(rec)
    out = rec
    for part in ((key,) if isinstance(key, str) else key):
        out = out[part]
    return float(out)


def fit_log_modulus(records, key="err_v_sup"):
    """Fit the modulus to records (ExperimentRecord or dicts); tuple keys reach into err_h_lp."""
    return fit_arrays([_get(r, "delta") for r in records], [_get(r, key) for r in records])


def bound_check(delta, err, alpha, slack=SLACK):
    """One-sided test of err ≤ C (log(3+1/δ))^{-α} with C within slack of the fitted C."""
    delta = np.asarray(delta, dtype=float)
    err = np.asarray(err, dtype=float)
    c = err * loglog_term(delta) ** alpha
    pos = c[c > 0]
    if pos.size == 0:
        return {"alpha": alpha, "C_min": 0.0, "C_fit": 0.0, "ratio": 0.0, "holds": True}
    c_fit = float(np.exp(np.mean(np.log(pos))))
    c_min = float(c.max())
    return {"alpha": float(alpha), "C_min": c_min, "C_fit": c_fit, "ratio": c_min / c_fit,
            "holds": bool(c_min <= slack * c_fit)}


# ---------------------------------------------------------------------------
# grid norms

def lp_norm(values, grid, p, mask=None):
    a = np.abs(values if mask is None else values[mask])
    return float((np.sum(a ** p) * grid.cell ** 2) ** (1.0 / p))


def _pkey(p):
    return f"{p:.6g}"


def _h_norms(h1, h2, p_values):
    g = h1.grid
    lam = g.nodes()
    d = h2.values - h1.values
    return {_pkey(p): {"h": lp_norm(d, g, p), "h_over_lambda": lp_norm(d / np.conj(lam), g, p)}
            for p in p_values}


# ---------------------------------------------------------------------------
# decay

def _ring_envelope(h, lo, hi):
    lam = h.grid.nodes()
    r = np.abs(lam).ravel()
    a = np.abs(h.values).ravel()
    edges = np.arange(lo, hi + h.grid.cell, h.grid.cell)
    idx = np.digitize(r, edges)
    mids, ring = [], []
    for k in range(1, len(edges)):
        sel = idx == k
        if sel.any():
            mids.append(0.5 * (edges[k - 1] + edges[k]))
            ring.append(a[sel].max())
    ring = np.array(ring)
    env = np.array([ring[i:].max() for i in range(len(ring))])
    return np.array(mids), env


def check_h_decay(h, m, n_tail=9):
    """Ring-maximum slope of log|h| and tail exponents of the grid L^p norms.

    The ring fit uses the outer envelope max_{|λ'| ≥ |λ|} |h| on [Λ/4, Λ];
    tails are ‖h‖_{L^p(R < |λ| ≤ Λ)} and ‖h/λ̄‖ for R in [Λ/8, Λ/2].
    """
    L = h.lambda_max
    if L < 8:
        raise ValidationError("decay check needs a λ-grid reaching |λ| >= 8")
    lam = h.grid.nodes()
    Rs = np.geomspace(L / 8, L / 2, n_tail)
    report = {"m": m, "lambda_max": L, "radii": Rs.tolist()}
    if h.is_zero():
        report.update(ring_slope=None, tails={}, zero=True)
        return report
    r, env = _ring_envelope(h, L / 4, L)
    ok = env > 0
    if ok.sum() < 4:
        raise NumericalError("insufficient decay range for a ring fit", module="stability-lab",
                             stage="check_h_decay")
    slope = float(np.polyfit(np.log(r[ok]), np.log(env[ok]), 1)[0])
    tails = {}
    for p in (4.0 / 3.0, 2.0, 4.0):
        for name, vals, expect in (("h", h.values, -(m - 2.0 / p)),
                                   ("h_over_lambda", h.values / np.conj(lam),
                                    -(m + 1 - 2.0 / p))):
            T = np.array([lp_norm(vals, h.grid, p, np.abs(lam) > R) for R in Rs])
            expo = float(np.polyfit(np.log(Rs), np.log(T), 1)[0])
            tails[f"{name}@{_pkey(p)}"] = {"values": T.tolist(), "exponent": expo,
                                          "expected": expect}
    report.update(ring_slope=slope, ring_slope_bound=-m + 0.5, tails=tails, zero=False)
    l2 = tails["h@2"]["exponent"]
    report["ring_ok"] = slope <= -m + 0.5
    report["tail_ok"] = abs(l2 - (-(m - 1))) <= 0.5
    return report


# ---------------------------------------------------------------------------
# pairs

def perturb_dtn(phi, delta, seed=0):
    """Φ + E with E random, realness- and symmetry-preserving, op-norm exactly δ."""
    if delta < 0:
        raise ValidationError("δ must be nonnegative")
    if delta == 0:
        return phi
    rng = np.random.default_rng(seed)
    d = phi.matrix.shape[0]
    E = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    E = 0.5 * (E + np.conj(E[::-1, ::-1]))
    E = 0.5 * (E + E[::-1, ::-1].T)
    zero = BoundaryOperator(np.zeros_like(E), phi.n_modes, phi.kind)
    E = E * (delta / op_norm_h12_hm12(BoundaryOperator(E, phi.n_modes, phi.kind), zero))
    return BoundaryOperator(phi.matrix + E, phi.n_modes, phi.kind)


@dataclass
class _PhantomRun:
    recipe: Optional[dict]
    phi: BoundaryOperator
    h: ScatteringAmplitude
    norm: float
    mu0: np.ndarray
    v: np.ndarray
    slices: np.ndarray


def _as_recipe(p):
    if p is None or isinstance(p, dict):
        return p
    return p.recipe


def _run_phantom(recipe, cfg, jobs):
    lg = cfg.lambda_grid
    zs = cfg.probe_points
    sigma = None if recipe is None else phantom_from_recipe(recipe)
    phi = cached_dtn(sigma, "phi", cfg.nb, cfg.n_r, cfg.n_theta, jobs, m=cfg.m)
    if sigma is None:
        zero = ComplexField(lg, np.zeros((lg.n_side, lg.n_side)))
        h = ScatteringAmplitude(zero, cfg.lambda_max, cfg.m)
        norm = 0.0
    else:
        v = potential_from_conductivity(sigma, cfg.m)
        h = scattering_grid(v, lg, cfg.lambda_max, jobs=jobs)
        norm = norm_w_m1(v, cfg.m)
    pts = pmap(partial(point_data, h, tol=cfg.tol, step=cfg.step, keep_slice=True),
               list(zs), jobs)
    return _PhantomRun(recipe, phi, h, norm, np.array([p.mu0 for p in pts]),
                       np.array([p.v_explicit for p in pts]),
                       np.array([p.slice.values for p in pts]))


def _record(a, b, cfg, ids=None):
    ida, idb = ids or (phantom_id(a.recipe), phantom_id(b.recipe))
    if ida == idb:
        raise ValidationError("run_pair needs distinct phantoms")
    delta = op_norm_h12_hm12(b.phi, a.phi)
    lg = cfg.lambda_grid
    dmu = max(lp_norm(sb - sa, lg, 4.0) for sa, sb in zip(a.slices, b.slices))
    return ExperimentRecord(
        ids=(ida, idb), m=cfg.m, N=max(a.norm, b.norm), delta=delta,
        err_v_sup=float(np.max(np.abs(b.v.real - a.v.real))),
        err_sigma_sup=float(np.max(np.abs((b.mu0 ** 2).real - (a.mu0 ** 2).real))),
        err_h_lp=_h_norms(a.h, b.h, cfg.p_values),
        err_mu0_sup=float(np.max(np.abs(b.mu0 - a.mu0))),
        err_mu_l4=float(dmu),
        grid={"lambda": lg.to_dict(), "lambda_max": cfg.lambda_max, "z_side": cfg.z_side,
              "nb": cfg.nb, "n_r": cfg.n_r, "n_theta": cfg.n_theta})


def run_pair(p1, p2, config=None, jobs=1):
    """Full pipeline for two conductivities (Conductivity, recipe dict, or None for σ ≡ 1)."""
    cfg = config or StabilityConfig()
    r1, r2 = _as_recipe(p1), _as_recipe(p2)
    if phantom_id(r1) == phantom_id(r2):
        raise ValidationError("run_pair needs distinct phantoms")
    a = _run_phantom(r1, cfg, jobs)
    b = _run_phantom(r2, cfg, jobs)
    return _record(a, b, cfg)


def _phantom_job(cfg, recipe):
    return _run_phantom(recipe, cfg, 1)


def run_family(pairs, config=None, jobs=1):
    """Records for a list of recipe pairs; every distinct phantom is run once."""
    cfg = config or StabilityConfig()
    keys, uniq = {}, []
    for pr in pairs:
        for r in pr:
            k = phantom_id(r)
            if k not in keys:
                keys[k] = len(uniq)
                uniq.append(r)
    runs = pmap(partial(_phantom_job, cfg), uniq, jobs)
    return [_record(runs[keys[phantom_id(a)]], runs[keys[phantom_id(b)]], cfg) for a, b in pairs]


def truncation_radius(delta, lambda_max, theta=0.5, ell=1.0):
    """R(δ) = min(Λ, θ log(1/δ) / (2l)).

    Amplitude errors from perturbed boundary data grow like e^{2l|λ|} δ, so
    on |λ| ≤ R they stay below δ^{1-θ}.
    """
    return float(min(lambda_max, theta * np.log(1.0 / delta) / (2.0 * ell)))


def _truncate(h, R):
    lam = h.grid.nodes()
    vals = np.where(np.abs(lam) <= R, h.values, 0.0)
    return ScatteringAmplitude(ComplexField(h.grid, vals), R, h.m, h.provenance,
                               h.phantom_recipe)


def _perturbed_job(base, cfg, theta, item):
    from .scatter import h_grid_from_dtn

    i, delta = item
    seed = cfg.seed + i
    phi = perturb_dtn(base.phi, delta, seed)
    R = truncation_radius(delta, cfg.lambda_max, theta)
    # the pairing is linear in Φ, so Φ' - Φ alone carries the data change
    dh = h_grid_from_dtn(phi, base.phi, cfg.lambda_grid, mode="born",
                         lambda_max=cfg.lambda_max)
    h = ScatteringAmplitude(ComplexField(cfg.lambda_grid, base.h.values + dh.values),
                            cfg.lambda_max, cfg.m, "from_dtn_born", base.recipe)
    h = _truncate(h, R)
    pts = [point_data(h, z, cfg.tol, cfg.step, keep_slice=True) for z in cfg.probe_points]
    run = _PhantomRun(base.recipe, phi, h, base.norm, np.array([p.mu0 for p in pts]),
                      np.array([p.v_explicit for p in pts]),
                      np.array([p.slice.values for p in pts]))
    tag = f"{phantom_id(base.recipe)}+E(delta={delta:.6g},seed={seed},R={R:.6g})"
    return _record(base, run, cfg, (phantom_id(base.recipe), tag))


def run_perturbed(recipe, deltas, config=None, jobs=1, theta=0.5):
    """Records (Φ, Φ + E_δ) for synthetic perturbations of one phantom's data.

    The perturbed amplitude is h + [h_Born(Φ + E) - h_Born(Φ)] truncated at
    ``truncation_radius(δ)``; the reference side keeps the full λ-disk.
    """
    cfg = config or StabilityConfig()
    deltas = [float(d) for d in deltas]
    if any(not 0 < d < 1 for d in deltas):
        raise ValidationError("synthetic δ must lie in (0, 1)")
    base = _run_phantom(_as_recipe(recipe), cfg, jobs)
    return pmap(partial(_perturbed_job, base, cfg, theta), list(enumerate(deltas)), jobs)


def bump_family(ts, radius=0.5, m=4, grid=None):
    """Pairs (σ ≡ 1, bump of amplitude t) for each t."""
    from .phantom import make_radial_bump

    out = []
    for t in ts:
        rec = dict(make_radial_bump(float(t), 0j, radius, grid).recipe)
        rec["m"] = m
        out.append((None, rec))
    return out


# ---------------------------------------------------------------------------
# reports

def _arrays(records, key):
    return (np.array([_get(r, "delta") for r in records]),
            np.array([_get(r, key) for r in records]))


def _fit_entry(records, key, alpha, slack):
    d, e = _arrays(records, key)
    entry = {"bound": bound_check(d, e, alpha, slack)}
    try:
        f = fit_log_modulus(records, key)
        entry["fit"] = {**asdict(f), "flagged": f.flagged}
    except ValidationError as exc:
        entry["fit"] = {"error": str(exc)}
    return entry


def check_v_stability(records, m, slack=SLACK, sigma_alpha=None):
    """v-error against α = m - 2; σ-error against sigma_alpha (default m - 1)."""
    sa = m - 1.0 if sigma_alpha is None else sigma_alpha
    return {"err_v_sup": _fit_entry(records, "err_v_sup", m - 2.0, slack),
            "err_sigma_sup": _fit_entry(records, "err_sigma_sup", sa, slack)}


def check_h_stability(records, m, p_values=P_VALUES, slack=SLACK):
    """h-errors against α = m + 1 - 2/p (for (Δh)/λ̄) and m - 2/p (for Δh)."""
    out = {}
    for p in p_values:
        k = _pkey(p)
        out[f"h_over_lambda@{k}"] = _fit_entry(records, ("err_h_lp", k, "h_over_lambda"),
                                               m + 1 - 2.0 / p, slack)
        out[f"h@{k}"] = _fit_entry(records, ("err_h_lp", k, "h"), m - 2.0 / p, slack)
    # μ-companion: sup_z ‖Δμ‖_{L⁴} against ‖Δh/λ̄‖_{L^{4/3}}
    k43 = _pkey(4.0 / 3.0)
    ratios = [r.err_mu_l4 / r.err_h_lp[k43]["h_over_lambda"] for r in records
              if k43 in r.err_h_lp and r.err_h_lp[k43]["h_over_lambda"] > 0]
    if ratios:
        med = float(np.median(ratios))
        out["mu_companion"] = {"ratios": ratios, "median": med,
                               "stable": bool(all(0.5 * med <= c <= 1.5 * med for c in ratios))}
    return out


def check_mu0_stability(records):
    """‖Δμ(·,0)‖_∞ over ‖Δh/λ̄‖_{L^{4/3} ∩ L^4} (the larger of the two norms)."""
    k1, k2 = _pkey(4.0 / 3.0), _pkey(4.0)
    ratios = []
    for r in records:
        den = max(r.err_h_lp[k1]["h_over_lambda"], r.err_h_lp[k2]["h_over_lambda"])
        ratios.append(r.err_mu0_sup / den if den > 0 else 0.0)
    return {"ratios": ratios, "max": float(max(ratios, default=0.0)),
            "bounded": bool(all(np.isfinite(ratios)))}


def all_fits(records, cfg):
    return {"v": check_v_stability(records, cfg.m, cfg.slack, cfg.sigma_alpha),
            "h": check_h_stability(records, cfg.m, cfg.p_values, cfg.slack),
            "mu0": check_mu0_stability(records)}


def bound_entries(fits):
    """Every (name, bound-check) pair in a fits report."""
    out = []
    for group in ("v", "h"):
        for name, entry in fits[group].items():
            if isinstance(entry, dict) and "bound" in entry:
                out.append((f"{group}:{name}", entry))
    return out


# ---------------------------------------------------------------------------
# output

GNUPLOT = """set logscale xy
set xlabel 'log(3 + 1/delta)'
set ylabel 'sup error'
set datafile separator ','
set key left bottom
plot 'plotdata.csv' using 2:3 skip 1 with points title 'err_v', \\
     'plotdata.csv' using 2:4 skip 1 with points title 'err_sigma', \\
     'plotdata.csv' using 2:5 skip 1 with lines title 'bound'
"""


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def plot_rows(records, fits, m):
    c = fits["v"]["err_v_sup"]["bound"]["C_min"]
    rows = []
    for r in sorted(records, key=lambda r: r.delta):
        L = float(loglog_term(r.delta))
        rows.append((r.delta, L, r.err_v_sup, r.err_sigma_sup, c * L ** (-(m - 2.0))))
    return rows


def write_outputs(outdir, records, fits, m):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "records.jsonl"), "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
    with open(os.path.join(outdir, "fits.json"), "w") as fh:
        fh.write(_canonical(fits))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "loglog_term", "err_v", "err_sigma", "bound"])
    for row in plot_rows(records, fits, m):
        w.writerow([repr(float(x)) for x in row])
    with open(os.path.join(outdir, "plotdata.csv"), "w") as fh:
        fh.write(buf.getvalue())
    with open(os.path.join(outdir, "plot.gp"), "w") as fh:
        fh.write(GNUPLOT)
