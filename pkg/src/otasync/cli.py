"""Command-line entry point.

    otasync run --preset fig3 --trials 200 --seed 1 --out fig3.csv
    otasync bound --theorem 1 --params snr_db=25 subcarriers=64 symbols=32
    otasync hcrb --config scene.yaml

Failures exit nonzero with one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, OfdmConfig, load_config, parse_config
from .harness import PRESETS, ExperimentError, preset_config, run_experiment
from .theory import (
    LocalizationProblem,
    SingularFisherError,
    cps_bound,
    crb_cfo,
    crb_to,
    decentralized_fused_hcrb,
    link_tof_variances,
    localization_hcrb,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="otasync", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo preset and write CSV")
    run.add_argument("--preset", required=True, choices=PRESETS)
    run.add_argument("--trials", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True)
    run.add_argument("--config", help="scene file for the custom preset")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--estimators", help="comma-separated subset, e.g. mle,mp")
    run.add_argument("--deployment", choices=("nearest", "square"))
    run.add_argument("--sweep", help="comma-separated sweep values overriding the preset range")

    bound = sub.add_parser("bound", help="evaluate a closed-form bound")
    bound.add_argument("--theorem", type=int, choices=(1, 2), required=True)
    bound.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE")

    hcrb = sub.add_parser("hcrb", help="localisation hybrid CRB for a scene file")
    hcrb.add_argument("--config", required=True)
    return ap


def _kv(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"non-numeric value for {key!r}: {value!r}") from None
    return out


def _ofdm(p: dict) -> OfdmConfig:
    return OfdmConfig(f_c=p.pop("carrier_hz", 5e9), bandwidth=p.pop("bandwidth_hz", 50e6),
                      P=int(p.pop("subcarriers", 64)), Q=int(p.pop("symbols", 32)))


def _bound(args) -> dict:
    p = _kv(args.params)
    cfg = _ofdm(p)
    if args.theorem == 1:
        gamma = p.pop("gamma", None)
        if gamma is None:
            gamma = 10 ** (p.pop("snr_db", 25.0) / 10)
        _reject_unknown(p)
        to, cfo = crb_to(gamma, cfg.P, cfg.Q, cfg.delta_f), crb_cfo(gamma, cfg.P, cfg.Q, cfg.T)
        return {"theorem": 1, "gamma": gamma, "crb_to_s2": to, "crb_cfo_hz2": cfo,
                "rcrb_to_s": float(np.sqrt(to)), "rcrb_cfo_hz": float(np.sqrt(cfo))}
    N = int(p.pop("nodes", 2))
    mu = p.pop("mu", 100e-6)
    sigma_sq = p.pop("noise_var", 1.0)
    alpha = p.pop("alpha", 1.0)
    if "eta" in p:
        eta = p.pop("eta")
    else:
        eta = 10 ** (p.pop("ref_snr_db", 17.0) / 10) * p.pop("ref_distance", 50.0) ** 4 * sigma_sq
    _reject_unknown(p)
    b = cps_bound(N, mu, eta, alpha, sigma_sq, cfg)
    return {"theorem": 2, "nodes": N, "mu": mu, "eta": eta,
            "total_var_to": b.total_var_to, "total_var_cfo": b.total_var_cfo}


def _reject_unknown(p: dict):
    if p:
        raise UsageError(f"unknown parameter(s): {', '.join(sorted(p))}")


def _hcrb(args) -> dict:
    """Scene file plus optional ``to_std_s`` (scalar or list, default 0)."""
    data = load_config(args.config)
    scene, cfg = parse_config(data)
    if len(scene.nodes) < 2 or not scene.targets:
        raise ConfigError("hcrb needs at least two nodes and one target")
    target = np.asarray(scene.targets[0].position)
    nodes = scene.node_positions
    tv = link_tof_variances(nodes, target, scene.eta, scene.targets[0].rcs, scene.noise_var, cfg)
    stds = np.atleast_1d(np.asarray(data.get("to_std_s", 0.0), dtype=float))
    rows = []
    for s in stds:
        prob = LocalizationProblem(nodes, target, tv, float(s) ** 2)
        rows.append({"to_std_s": float(s), "centralized_m2": localization_hcrb(prob),
                     "decentralized_m2": decentralized_fused_hcrb(prob)})
    synced = localization_hcrb(LocalizationProblem(nodes, target, tv, 0.0))
    return {"synchronized_m2": synced, "sweep": rows}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.command == "run":
            overrides = {}
            if args.estimators:
                overrides["estimators"] = tuple(s.strip() for s in args.estimators.split(","))
            if args.deployment:
                overrides["deployment"] = args.deployment
            if args.sweep:
                overrides["sweep_values"] = tuple(float(v) for v in args.sweep.split(","))
            if args.preset == "custom":
                if not args.config:
                    raise UsageError("--config is required for the custom preset")
                scene, cfg = parse_config(load_config(args.config))
                overrides.update(scene=scene, cfg=cfg)
            exp = preset_config(args.preset, args.trials, args.seed, out=args.out, **overrides)
            records = run_experiment(exp, workers=args.workers)
            print(json.dumps({"status": "ok", "records": len(records), "out": args.out}))
        elif args.command == "bound":
            print(json.dumps(_bound(args)))
        else:
            print(json.dumps(_hcrb(args)))
        return 0
    except UsageError as exc:
        code, kind, msg = 2, "usage", str(exc)
    except (ConfigError, ExperimentError, SingularFisherError, ValueError) as exc:
        code, kind, msg = 1, type(exc).__name__, str(exc)
    print(json.dumps({"status": "error", "error": kind, "message": msg}), file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
