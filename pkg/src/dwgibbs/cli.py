"""Command-line entry point.

Every subcommand reads an optional JSON config (``--config``) whose keys are
the long option names with underscores.  Explicit flags override the config,
which overrides the built-in defaults.  Each run writes its CSV/JSON outputs
and a ``manifest.json`` to ``--out``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .badconfig import gap_experiment, gibbs_scan, make_bad_config
from .dobrushin import (
    CertificateError,
    classify_regime,
    dobrushin_constant,
    influence_matrix,
    small_s_bounds,
)
from .evolution import DynamicsParams, conditional_mu_t, conditional_mu_t_bruteforce, evolve_samples
from .gaussian import sample_mu_plus
from .lattice import build_box
from .resolvent import ModelParams, decay_fit, natural_params, resolvent_direct, resolvent_series

# name -> (type, default, help)
COMMON = {
    "q": (float, 0.5, "coupling strength q"),
    "rho2": (float, 0.5, "single-site variance parameter rho^2"),
    "h": (float, 0.0, "external field h"),
    "d": (int, 2, "lattice dimension"),
    "seed": (int, 0, "random seed"),
}

OPTIONS = {
    "regime": {
        "grid": (str, None, "JSON list of {d, q, rho2} points (defaults to the single q/rho2/d)"),
        "beta_d": (float, None, "inverse critical temperature for d >= 3"),
    },
    "certify": {
        "s": (float, 1.0, "Brownian time s"),
        "side": (int, 5, "box side"),
        "site": (int, None, "site index x (default: origin)"),
        "perturb_site": (int, None, "site z carrying a unit eta perturbation"),
    },
    "gap": {
        "s": (float, 1000.0, "Brownian time s"),
        "K": (float, 10.0, "annulus field strength"),
        "V0_side": (int, 3, "core side"),
        "V1_side": (int, 7, "annulus outer side"),
        "ambient_side": (int, 9, "spin box side"),
        "estimator": (str, "tau_marg", "tau_marg or eta_mean"),
        "sweeps": (int, 20_000, "coupled heat-bath sweeps"),
    },
    "scan": {
        "times": (str, None, "JSON list of OU times"),
        "rho_inf2": (float, 1.0, "stationary OU variance"),
        "K": (float, 10.0, "annulus field strength"),
        "V0_sides": (str, "[3, 5, 7]", "JSON list of core sides"),
        "sweeps": (int, 20_000, "coupled heat-bath sweeps per gap experiment"),
    },
    "sample": {
        "side": (int, 3, "box side"),
        "n": (int, 1000, "number of samples"),
        "boundary": (str, "plus", "plus, minus or free"),
        "t": (float, None, "optional OU time to evolve the samples"),
        "rho_inf2": (float, 1.0, "stationary OU variance"),
    },
    "evolve": {
        "side": (int, 3, "box side"),
        "t": (float, None, "OU time (overrides s)"),
        "s": (float, 1.0, "Brownian time"),
        "rho_inf2": (float, 1.0, "stationary OU variance"),
        "eta": (str, "0.0", "value or JSON list on V minus origin"),
        "n_tau": (int, 20_000, "hidden-spin samples (ignored when enumerated)"),
        "bruteforce": (int, 0, "also run the importance-sampling oracle with this many draws"),
    },
    "resolvent": {
        "side": (int, 8, "box side"),
        "method": (str, "direct", "direct or series"),
        "tol": (float, 1e-12, "series tail tolerance"),
    },
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwgibbs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, default=Path("dwgibbs-out") / cmd, help="output directory")
        for name, (typ, default, help_) in {**COMMON, **opts}.items():
            sp.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None,
                            help=f"{help_} (default {default})")
    return p


def resolve_config(cmd: str, args: argparse.Namespace) -> dict:
    spec = {**COMMON, **OPTIONS[cmd]}
    cfg = {k: v[1] for k, v in spec.items()}
    if args.config is not None:
        loaded = json.loads(args.config.read_text())
        unknown = set(loaded) - set(spec)
        if unknown:
            raise SystemExit(f"unknown config keys for {cmd}: {sorted(unknown)}")
        for k, v in loaded.items():
            typ = spec[k][0]
            if v is None:
                cfg[k] = None
            elif typ is str and not isinstance(v, str):
                cfg[k] = json.dumps(v)  # list-valued options travel as JSON text, like their flags
            else:
                cfg[k] = typ(v)
    for k in spec:
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    return cfg


def _params(cfg) -> ModelParams:
    return ModelParams(cfg["q"], cfg["rho2"], cfg["h"])


def _regime(cfg, out):
    grid = json.loads(cfg["grid"]) if cfg["grid"] else [{"d": cfg["d"], "q": cfg["q"], "rho2": cfg["rho2"]}]
    rows = []
    for g in grid:
        p = ModelParams(g["q"], g["rho2"])
        rep = classify_regime(p, g["d"], g.get("beta_d", cfg["beta_d"]))
        nat = natural_params(p, g["d"])
        try:
            c = dobrushin_constant(nat)
        except CertificateError:
            c = math.inf
        rows.append({"d": g["d"], "q": p.q, "rho2": p.rho2, "regime": rep.regime, "c_bound": c,
                     "a0": nat.a0, "lambda": nat.lam})
    return [io.write_records_csv(out / "regime.csv", rows)], rows


def _certify(cfg, out):
    p = _params(cfg)
    vol = build_box(cfg["d"], cfg["side"])
    x = vol.origin_index if cfg["site"] is None else cfg["site"]
    nat = natural_params(p, cfg["d"])
    B = influence_matrix(nat, cfg["s"], vol)
    files = [io.write_records_csv(out / "influence.csv", io.matrix_records(B.matrix, vol, name="bound"))]
    summary = {"dobrushin_constant_bound": B.dobrushin_constant_bound, "contraction": nat.contraction}
    delta = np.zeros(vol.n_sites)
    if cfg["perturb_site"] is not None:
        delta[cfg["perturb_site"]] = 1.0
    try:
        sb = small_s_bounds(p, cfg["s"], vol, np.arange(vol.n_sites), x, delta)
        summary["small_s"] = sb._asdict()
    except CertificateError as exc:
        summary["small_s"] = {"error": str(exc)}
    files.append(io.write_json(out / "certify.json", summary))
    return files, summary


def _gap(cfg, out):
    g = gap_experiment(_params(cfg), cfg["s"], cfg["K"], cfg["V0_side"], cfg["V1_side"], cfg["ambient_side"],
                       cfg["estimator"], cfg["sweeps"], cfg["seed"], cfg["d"])
    spec = make_bad_config(_params(cfg), DynamicsParams.bm(cfg["s"]), cfg["K"], cfg["V0_side"], cfg["V1_side"])
    rec = {**g.as_dict(), "eta_spec": spec.eta_spec_value}
    return [io.write_records_csv(out / "gap.csv", [rec]), io.write_json(out / "gap.json", rec)], rec


def _scan(cfg, out):
    times = json.loads(cfg["times"]) if cfg["times"] else list(np.geomspace(0.01, math.log(1001.0), 6))
    grid = [DynamicsParams.ou(t, cfg["rho_inf2"]) for t in times]
    res = gibbs_scan(_params(cfg), grid, cfg["K"], json.loads(cfg["V0_sides"]), cfg["d"], cfg["sweeps"], cfg["seed"])
    rows = []
    for pt in res.points:
        base = {"t": pt.t, "s": pt.s, "label": pt.label, "contraction": pt.contraction}
        if not pt.gaps:
            rows.append(base)
        for g in pt.gaps:
            rows.append({**base, "V0_size": g.V0_size, "gap": g.gap, "se": g.std_error})
    summary = {"t0": res.t0, "t1": res.t1, "points": [p.as_dict() for p in res.points]}
    return [io.write_records_csv(out / "scan.csv", rows), io.write_json(out / "scan.json", summary)], {
        "t0": res.t0, "t1": res.t1}


def _sample(cfg, out):
    vol = build_box(cfg["d"], cfg["side"])
    smp = sample_mu_plus(_params(cfg), vol, cfg["n"], cfg["seed"], boundary=cfg["boundary"])
    files = [io.write_samples_csv(out / "tau.csv", smp.tau, "tau"), io.write_samples_csv(out / "sigma.csv", smp.sigma, "sigma")]
    if cfg["t"] is not None:
        eta = evolve_samples(smp.sigma, DynamicsParams.ou(cfg["t"], cfg["rho_inf2"]), cfg["seed"] + 1)
        files.append(io.write_samples_csv(out / "eta.csv", eta, "eta"))
    summary = {"n": cfg["n"], "ambient_sites": smp.ambient.n_sites, "mean_tau": float(smp.tau.mean())}
    return files, summary


def _evolve(cfg, out):
    vol = build_box(cfg["d"], cfg["side"])
    dyn = DynamicsParams.ou(cfg["t"], cfg["rho_inf2"]) if cfg["t"] is not None else DynamicsParams.bm(cfg["s"])
    eta = json.loads(cfg["eta"])
    p = _params(cfg)
    est = conditional_mu_t(p, dyn, vol, eta, cfg["n_tau"], cfg["seed"])
    common = {"t_or_s": dyn.label(), "mode": dyn.mode, "V_size": vol.n_sites, "eta_spec_hash": io.content_hash(eta)}
    recs = [est.as_record(**common)]
    if cfg["bruteforce"]:
        bf = conditional_mu_t_bruteforce(p, dyn, vol, eta, cfg["bruteforce"], cfg["seed"])
        recs.append(bf.as_record(**common))
    return [io.write_records_csv(out / "conditional.csv", recs), io.write_json(out / "conditional.json", recs)], recs


def _resolvent(cfg, out):
    vol = build_box(cfg["d"], cfg["side"])
    p = _params(cfg)
    R = resolvent_direct(vol, p) if cfg["method"] == "direct" else resolvent_series(vol, p, cfg["tol"])
    summary = {"provenance": R.provenance, "n_terms": R.n_terms, "residual": R.residual}
    try:
        summary["decay_slope"], summary["decay_r2"] = decay_fit(R, vol)
    except ValueError as exc:
        summary["decay_fit"] = str(exc)
    files = [io.write_records_csv(out / "resolvent.csv", io.matrix_records(R.matrix, vol)),
             io.write_json(out / "resolvent.json", summary)]
    return files, summary


HANDLERS = {"regime": _regime, "certify": _certify, "gap": _gap, "scan": _scan, "sample": _sample,
            "evolve": _evolve, "resolvent": _resolvent}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = resolve_config(args.command, args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        files, summary = HANDLERS[args.command](cfg, out)
    except (ValueError, CertificateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    io.write_manifest(out, args.command, cfg, files, {"seed": cfg["seed"]})
    print(json.dumps(io.to_plain(summary), indent=2, default=str))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
