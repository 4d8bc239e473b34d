"""Command-line front end: ``calderon <command> ...``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.  A JSON run
config (``--config``) supplies option values for the chosen command and is
validated against ``schemas/run_config.json`` first; flags on the command
line override it.
"""
import argparse
import json
import sys
from importlib import resources

import jsonschema

from . import BACKEND
from .errors import NumericalError, ValidationError
from .parallel import default_jobs

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def load_schema(name):
    return json.loads(resources.files("calderon").joinpath("schemas", name).read_text())


def validate(obj, schema):
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid configuration: {exc.message}") from exc


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def parse_zgrid(text):
    from .grid import GridSpec

    try:
        s, n = text.split(",")
        return GridSpec(0j, float(s), int(n), True)
    except ValueError as exc:
        raise ValidationError(f"--zgrid expects 'half_width,n_side', got {text!r}") from exc


# ---------------------------------------------------------------------------
# commands

def cmd_phantom(a):
    from .grid import GridSpec, write_cgrid
    from .phantom import make_radial_bump, make_radial_power, potential_from_conductivity, \
        save_recipe

    grid = GridSpec(0j, a.grid_s, a.grid_n, True)
    c = complex(*a.center)
    if a.type == "radial_bump":
        sigma = make_radial_bump(a.t, c, a.radius, grid)
    else:
        sigma = make_radial_power(a.t, c, a.radius, a.m if a.m is not None else 3, grid)
    recipe = dict(sigma.recipe)
    if a.m is not None:
        recipe["m"] = a.m
    validate(recipe, load_schema("phantom.json"))
    save_recipe(a.out, recipe)
    if a.sigma_out:
        write_cgrid(a.sigma_out, sigma.field)
    if a.v_out:
        write_cgrid(a.v_out, potential_from_conductivity(sigma).field)


def _load_phantom(path):
    from .phantom import phantom_from_recipe

    recipe = _read_json(path)
    validate(recipe, load_schema("phantom.json"))
    return phantom_from_recipe(recipe)


def cmd_forward(a):
    from .cache import cached_dtn
    from .forward import write_bop

    if a.laplace == bool(a.phantom):
        raise ValidationError("give exactly one of --phantom or --laplace")
    sigma = None if a.laplace else _load_phantom(a.phantom)
    op = cached_dtn(sigma, a.kind, a.nb, a.n_r, a.n_theta, a.jobs, a.extraction)
    write_bop(a.out, op)


def cmd_scatter(a):
    from .faddeev import scattering_grid, write_amplitude
    from .forward import read_bop
    from .grid import GridSpec
    from .phantom import potential_from_conductivity
    from .scatter import h_grid_from_dtn

    lg = GridSpec(0j, a.lambda_s or a.lambda_max, a.n_lambda, True)
    v = potential_from_conductivity(_load_phantom(a.phantom)) if a.phantom else None
    if a.direct:
        if v is None:
            raise ValidationError("--direct needs --phantom")
        h = scattering_grid(v, lg, a.lambda_max, a.tol, a.jobs)
    else:
        if not (a.phi and a.phi0):
            raise ValidationError("give --phi and --phi0, or --direct")
        h = h_grid_from_dtn(read_bop(a.phi), read_bop(a.phi0), lg, a.psi_mode, v,
                            a.lambda_max, a.tol, a.jobs)
    write_amplitude(a.out, h)


def cmd_dbar(a):
    from .dbar import reconstruct_sigma, solve_mu_from_h
    from .faddeev import read_amplitude
    from .grid import write_cgrid

    h = read_amplitude(a.h)
    if a.slice is not None:
        sl = solve_mu_from_h(h, complex(*a.slice), a.tol)
        write_cgrid(a.out, sl.field)
        print(f"residual {sl.residual:.3e}")
        return
    write_cgrid(a.out, reconstruct_sigma(h, parse_zgrid(a.zgrid), a.tol, jobs=a.jobs).field)


def cmd_reconstruct(a):
    from .dbar import reconstruct_sigma, reconstruct_v_asymptotic, reconstruct_v_explicit
    from .faddeev import read_amplitude
    from .grid import write_cgrid

    h = read_amplitude(a.h)
    zg = parse_zgrid(a.zgrid)
    fn = {"sigma": reconstruct_sigma, "v-explicit": reconstruct_v_explicit,
          "v-asymptotic": reconstruct_v_asymptotic}[a.target]
    write_cgrid(a.out, fn(h, zg, a.tol, jobs=a.jobs).field)


def cmd_stability(a):
    from .stability import StabilityConfig, all_fits, bump_family, run_family, run_perturbed, \
        write_outputs

    fam = _read_json(a.family)
    validate(fam, load_schema("family.json"))
    cfg = StabilityConfig.from_dict(fam.get("config", {}))
    pairs = [tuple(p) for p in fam.get("pairs", [])]
    if "bump_family" in fam:
        b = fam["bump_family"]
        from .grid import GridSpec

        g = b.get("grid")
        grid = GridSpec(0j, g["s"], g["n"], g.get("offset", True)) if g else None
        pairs += bump_family(b["t"], b.get("radius", 0.5), b.get("m", cfg.m), grid)
    synth = fam.get("perturbed")
    if not pairs and not synth:
        raise ValidationError("family has no pairs")
    records = run_family(pairs, cfg, a.jobs) if pairs else []
    if synth:
        records += run_perturbed(synth["recipe"], synth["delta"], cfg, a.jobs,
                                 synth.get("theta", 0.5))
    fits = all_fits(records, cfg)
    write_outputs(a.out, records, fits, cfg.m)
    b = fits["v"]["err_v_sup"]
    print(f"{len(records)} records; v bound ratio {b['bound']['ratio']:.3g}")


def cmd_verify(a):
    from .checks import oracle_checks, trivial_checks

    rows = trivial_checks()
    if not a.quick:
        rows += oracle_checks()
    width = max(len(r[0]) for r in rows)
    print(f"backend: {BACKEND}")
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    if not all(ok for _, ok, _ in rows):
        raise NumericalError("verification failed", module="cli", stage="verify")


# ---------------------------------------------------------------------------
# parser

def build_parser():
    p = argparse.ArgumentParser(prog="calderon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON run config for this command")
        sp.add_argument("--jobs", type=int, default=default_jobs(),
                        help="worker processes (default: available cores)")
        sp.set_defaults(func=func)
        return sp

    sp = add("phantom", cmd_phantom, "write a phantom recipe (and optional sampled fields)")
    sp.add_argument("--type", choices=["radial_bump", "radial_power"], default="radial_bump")
    sp.add_argument("--t", type=float, default=0.5)
    sp.add_argument("--radius", type=float, default=0.5)
    sp.add_argument("--center", type=float, nargs=2, default=[0.0, 0.0])
    sp.add_argument("--m", type=int)
    sp.add_argument("--grid-s", type=float, default=2.1)
    sp.add_argument("--grid-n", type=int, default=256)
    sp.add_argument("--sigma-out")
    sp.add_argument("--v-out")
    sp.add_argument("--out")

    sp = add("forward", cmd_forward, "DtN map of a phantom (BOP1)")
    sp.add_argument("--phantom")
    sp.add_argument("--laplace", action="store_true", help="v = 0 on the same discretization")
    sp.add_argument("--kind", choices=["phi", "lambda"], default="phi")
    sp.add_argument("--nb", type=int, default=16)
    sp.add_argument("--n-r", type=int, default=256)
    sp.add_argument("--n-theta", type=int, default=256)
    sp.add_argument("--extraction", choices=["flux", "one-sided"], default="flux")
    sp.add_argument("--out")

    sp = add("scatter", cmd_scatter, "scattering amplitude on a λ-grid (CGRID1 + sidecar)")
    sp.add_argument("--phi")
    sp.add_argument("--phi0")
    sp.add_argument("--psi-mode", choices=["oracle", "born"], default="oracle")
    sp.add_argument("--direct", action="store_true")
    sp.add_argument("--phantom")
    sp.add_argument("--lambda-max", type=float, default=8.0)
    sp.add_argument("--lambda-s", type=float, help="λ-grid half width (default lambda-max)")
    sp.add_argument("--n-lambda", type=int, default=64)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--out")

    sp = add("dbar", cmd_dbar, "σ on a z-grid, or one μ(z,·) slice with --slice")
    sp.add_argument("--h")
    sp.add_argument("--zgrid", default="1.0,32", help="half_width,n_side")
    sp.add_argument("--tol", type=float, default=5e-2)
    sp.add_argument("--slice", type=float, nargs=2, metavar=("RE", "IM"))
    sp.add_argument("--out")

    sp = add("reconstruct", cmd_reconstruct, "σ or v on a z-grid")
    sp.add_argument("target", choices=["sigma", "v-explicit", "v-asymptotic"])
    sp.add_argument("--h")
    sp.add_argument("--zgrid", default="1.0,32")
    sp.add_argument("--tol", type=float, default=5e-2)
    sp.add_argument("--out")

    sp = add("stability", cmd_stability, "stability experiment over a phantom family")
    sp.add_argument("--family")
    sp.add_argument("--out")

    sp = add("verify", cmd_verify, "identity and oracle checks")
    sp.add_argument("--quick", action="store_true", help="identity checks only")
    return p


REQUIRED = {"phantom": ("out",), "forward": ("out",), "scatter": ("out",),
            "dbar": ("h", "out"), "reconstruct": ("h", "out"), "stability": ("family", "out")}


def _check_required(args):
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) is None]
    if missing:
        raise ValidationError("missing required option(s): "
                              + ", ".join("--" + k.replace("_", "-") for k in missing))
    return args


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return _check_required(args)
    cfg = _read_json(args.config)
    schema = load_schema("run_config.json")
    defs = schema["$defs"]
    validate(cfg, {**defs[args.command], "$defs": defs})
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**cfg)
    return _check_required(parser.parse_args(argv))


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "jobs", 1) < 1:
            raise ValidationError("--jobs must be at least 1")
        args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
