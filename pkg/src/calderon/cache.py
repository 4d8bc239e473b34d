"""On-disk memo of forward DtN solves, keyed by recipe and resolution.

Enabled by setting DBAR_CACHE_DIR; entries are BOP1 files named by the
SHA-256 of the canonical JSON key.
"""
import hashlib
import json
import os

from .forward import dtn_conductivity, dtn_schrodinger, read_bop, write_bop

ENV_VAR = "DBAR_CACHE_DIR"


def cache_key(recipe, kind, nb, n_r, n_theta, extraction):
    blob = json.dumps({"recipe": recipe, "kind": kind, "nb": nb, "n_r": n_r,
                       "n_theta": n_theta, "extraction": extraction}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cached_dtn(phantom, kind, nb, n_r, n_theta, jobs=1, extraction="flux", m=4):
    """Φ (kind 'phi') or Λ (kind 'lambda') of a conductivity phantom or None (σ ≡ 1)."""
    from .phantom import potential_from_conductivity

    def compute():
        if kind == "lambda":
            return dtn_conductivity(phantom, nb, n_r, n_theta, jobs, extraction)
        v = None if phantom is None else potential_from_conductivity(phantom, m)
        return dtn_schrodinger(v, nb, n_r, n_theta, jobs, extraction)

    root = os.environ.get(ENV_VAR)
    recipe = None if phantom is None else phantom.recipe
    if not root or (phantom is not None and recipe is None):
        return compute()
    path = os.path.join(root, cache_key(recipe, kind, nb, n_r, n_theta, extraction) + ".bop")
    if os.path.exists(path):
        return read_bop(path)
    op = compute()
    os.makedirs(root, exist_ok=True)
    tmp = f"{path}.{os.getpid()}.tmp"
    write_bop(tmp, op)
    os.replace(tmp, path)
    return op
