"""Command-line front end.

Exit codes: 0 success, 1 failed invariants (validate), 2 invalid config,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import boundary as bd
from . import entropy as en
from . import families as fa
from . import fuchsian as fx
from . import metric as mt
from .config import SUBCOMMAND_KAPPA, SUBCOMMAND_RMAX, config_hash, load_config
from .errors import ConfigError, QuasicircleError

SUBCOMMANDS = ("entropy", "hdim", "qcheck", "family", "gap", "validate")


def _kappa(cfg, sub):
    k = cfg["group"]["kappa0"]
    return float(SUBCOMMAND_KAPPA[sub] if k is None else k)


def build_metric(cfg, kappa0, n_bumps=None):
    mc = cfg["metric"]
    g = fx.standard_genus2_group(kappa0)
    n = n_bumps or mc["n_bumps"]
    centers = None if mc["centers"] is None else [complex(x, y) for x, y in mc["centers"]]
    m = mt.ConformalMetric.default(g, n, centers=centers, r1=mc["r1"], r2=mc["r2"])
    if mc["t"] is not None and n_bumps is None:
        if len(mc["t"]) != m.n_bumps:
            raise ConfigError("'metric.t' length must match the number of bumps", line=1)
        m = m.with_t(mc["t"])
    return m


def _provenance(cfg, sub):
    return {
        "subcommand": sub,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "versions": {"quasicircle": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out, name, text):
    path = out / name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def run_entropy(cfg, out):
    k = _kappa(cfg, "entropy")
    m = build_metric(cfg, k)
    ec = cfg["entropy"]
    R = ec["R_max"] or SUBCOMMAND_RMAX.get(k, 9.0)
    census = en.orbit_census(m, R, ec["step"])
    est = en.entropy_estimate(census, ec["min_span"], ec["max_residual"])
    _write(out, "census.csv", census.to_csv())
    rep = json.loads(est.to_json()) | {"kappa0": k, "assumption": est.assumption}
    return {"entropy.json": rep}


def run_hdim(cfg, out):
    k = _kappa(cfg, "hdim")
    bc = cfg["boundary"]
    ctx = bd.VisualMetricContext(build_metric(cfg, k), bc["T"], bc["variant"])
    res = bd.boxcount_dimension(ctx, bc["m"], bc["scales"], seed=cfg["seed"])
    _write(out, "boxcount.csv", res.to_csv())
    return {"hdim.json": {"dimension": res.dimension, "stderr": res.stderr, "kappa0": k}}


def run_qcheck(cfg, out):
    k = _kappa(cfg, "qcheck")
    bc = cfg["boundary"]
    ctx = bd.VisualMetricContext(build_metric(cfg, k), bc["T"], bc["variant"])
    scales = list(bc["fit_scales"]) + [bc["heldout_scale"]]
    scan = bd.expansion_scan(ctx, scales, bc["n_arcs"], bc["n_pairs"], seed=cfg["seed"])
    band = bd.fit_band(np.concatenate([scan[float(r)].factors.ravel() for r in bc["fit_scales"]]))
    held = scan[float(bc["heldout_scale"])]
    rep = held.report(band)
    rep["fraction_inside"] = 1 - rep["violations"] / held.factors.size
    return {"qcheck.json": rep}


def run_family(cfg, out):
    k = _kappa(cfg, "family")
    fc = cfg["family"]
    n = fc["k"] + 2
    m = build_metric(cfg, k, n_bumps=n)
    v = np.asarray(fc["v"], float) if fc["v"] is not None else default_tangent(n)
    F = fa.EntropyFunctional(m, fc["R_max"], fc["census_step"], tuple(fc["window"]))
    box = fa.certified_box(m)
    pts = fa.track_level_set(m, v, fc["steps"], fc["step"], F=F, tol_F=fc["tol_F"], box=box)
    sliced = fa.equal_area_slice(m, pts[1:], tol_A=fc["tol_A"], F=F, tol_F=fc["tol_F"], box=box) if len(pts) > 2 else None
    family = sliced.points if sliced else pts
    rep = {
        "box": box,
        "target_area": sliced.target if sliced else None,
        "rejected": len(sliced.rejected) if sliced else 0,
        "points": json.loads(fa.family_json(family, box, k)),
    }
    return {"family.json": rep}


def default_tangent(n):
    """Sum-zero tangent with distinct nonzero coordinates."""
    if n == 2:
        v = np.array([1.0, -1.0])
    else:
        v = np.arange(1, n + 1, dtype=float)
        v[-1] = -v[:-1].sum()
    return v / np.linalg.norm(v)


def run_gap(cfg, out):
    g = fa.gap_bound(cfg["gap"]["s1"], cfg["gap"]["s2"])
    return {"gap.json": json.loads(g.to_json())}


def run_validate(cfg, out):
    from .validation import run_suite

    checks = run_suite(cfg["seed"])
    rep = {
        "checks": [c.to_dict() for c in checks],
        "passed": all(c.passed for c in checks),
        "n_failed": sum(not c.passed for c in checks),
    }
    return {"validate.json": rep}


RUNNERS = {
    "entropy": run_entropy,
    "hdim": run_hdim,
    "qcheck": run_qcheck,
    "family": run_family,
    "gap": run_gap,
    "validate": run_validate,
}


def make_parser():
    p = argparse.ArgumentParser(prog="quasicircle", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="random seed (u64)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (recorded only)")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(text)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("'--seed' must be an unsigned 64-bit integer", line=0)
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["output"] = str(args.out)
        out = Path(cfg["output"])
        out.mkdir(parents=True, exist_ok=True)
        start = time.time()
        reports = RUNNERS[args.subcommand](cfg, out)
    except ConfigError as exc:
        name = args.config or "<defaults>"
        print(f"{name}:{exc.line or 0}: {exc}", file=sys.stderr)
        return 2
    except QuasicircleError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "payload": _jsonable(exc.payload)}), file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "payload": {}}), file=sys.stderr)
        return 3
    prov = _provenance(cfg, args.subcommand)
    for name, rep in reports.items():
        _write(out, name, _dump({"provenance": prov, "result": rep}))
    # timing lives outside the reports so that they stay byte-identical
    run = prov | {"wall_clock_s": time.time() - start, "threads": args.threads, "python": platform.python_version()}
    _write(out, f"{args.subcommand}.run.json", _dump(run))
    if args.subcommand == "validate" and not reports["validate.json"]["passed"]:
        return 1
    return 0


def _jsonable(payload):
    out = {}
    for k, v in payload.items():
        try:
            json.dumps(v)
            out[k] = v
        except TypeError:
            out[k] = repr(v)
    return out


if __name__ == "__main__":
    sys.exit(main())
