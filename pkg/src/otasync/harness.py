"""Seeded Monte Carlo experiment driver and CSV output.

Every trial owns a generator seeded from (master seed, sweep point index,
trial index), so results do not depend on worker count or completion order.
"""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import NodeState, OfdmConfig, Scene, Target
from .estimators import estimate_offsets
from .network import deploy_nearest, synchronize_network, target_distances
from .signal_model import ICIWarning, measure_channel
from .theory import (
    LocalizationProblem,
    SingularFisherError,
    cps_bound,
    cps_crb_sum,
    crb_cfo,
    crb_to,
    decentralized_fused_hcrb,
    link_tof_variances,
    localization_hcrb,
    select_reference,
)

PRESETS = ("fig3", "fig4", "fig5", "fig7", "fig8", "fig11", "custom")
CSV_COLUMNS = ("sweep_var", "sweep_value", "estimator", "metric", "value", "theory", "trials", "seed")
FIG3_NODES = ((35.35, -35.35), (-35.35, -35.35))


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep.

    ``ref_snr_db`` at ``ref_distance`` metres from both nodes fixes eta for
    the network presets (noise variance is 1).  ``deployment`` is
    ``"nearest"`` (the N PPP points closest to the target) or ``"square"``
    (N uniform points on a square of area N / mu).
    """

    preset: str
    sweep_var: str
    sweep_values: tuple
    trials: int = 1000
    estimators: tuple[str, ...] = ("cc", "mle", "mp")
    cfg: OfdmConfig = field(default_factory=OfdmConfig)
    scene: Scene | None = None
    seed: int = 0
    out: str | None = None
    snr_db: float = 25.0
    to_std: float = 20e-9
    cfo_std: float = 10e3
    zero_pad: int = 8
    mu: float = 100e-6
    area: float | None = None
    ref_snr_db: float = 17.0
    ref_distance: float = 50.0
    deployment: str = "nearest"
    n_nodes: tuple[int, ...] = (2, 3)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ExperimentError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if len(self.sweep_values) == 0:
            raise ExperimentError("sweep range is empty")
        if self.deployment not in ("nearest", "square"):
            raise ExperimentError(f"unknown deployment {self.deployment!r}")

    @property
    def eta(self) -> float:
        return 10 ** (self.ref_snr_db / 10) * self.ref_distance**4


@dataclass(frozen=True)
class ResultRecord:
    sweep_var: str
    sweep_value: float
    estimator: str
    metric: str
    value: float
    theory: float
    trials: int
    seed: int


def preset_config(name: str, trials: int = 1000, seed: int = 0, **overrides) -> ExperimentConfig:
    """Default configuration for a named preset; keyword overrides win."""
    base = dict(preset=name, trials=trials, seed=seed)
    if name == "fig3":
        base.update(sweep_var="snr_db", sweep_values=tuple(range(-10, 31, 5)))
    elif name == "fig4":
        base.update(sweep_var="symbols", sweep_values=(8, 16, 32, 64, 128), estimators=("mle", "mp"))
    elif name == "fig5":
        df = OfdmConfig().delta_f
        base.update(sweep_var="bandwidth_hz", sweep_values=tuple(df * p for p in (16, 32, 64, 128, 256)),
                    estimators=("mle", "mp"))
    elif name in ("fig7", "fig8"):
        base.update(sweep_var="nodes", sweep_values=(2, 3, 4, 5, 6), estimators=("mle", "mp"))
        if name == "fig8":
            base.update(area=200.0**2)
    elif name == "fig11":
        base.update(sweep_var="to_std_s", sweep_values=tuple(np.logspace(-12, -8, 9)),
                    estimators=("centralized", "decentralized"), ref_snr_db=25.0, n_nodes=(2, 3))
    elif name == "custom":
        base.update(sweep_var="snr_db", sweep_values=(25.0,))
    else:
        raise ExperimentError(f"unknown preset {name!r}; choose from {PRESETS}")
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**base)


def _trial_rng(cfg: ExperimentConfig, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, point, trial]))


# -- pairwise presets (fig3/4/5/custom) ---------------------------------------

def _point_ofdm(exp: ExperimentConfig, value: float) -> OfdmConfig:
    if exp.sweep_var == "symbols":
        return replace(exp.cfg, Q=int(value))
    if exp.sweep_var == "bandwidth_hz":
        P = int(round(value / exp.cfg.delta_f))
        return OfdmConfig(f_c=exp.cfg.f_c, bandwidth=value, P=P, Q=exp.cfg.Q)
    return exp.cfg


def _point_snr(exp: ExperimentConfig, value: float) -> float | None:
    if exp.sweep_var == "snr_db":
        return float(value)
    if exp.preset == "custom" and exp.scene is not None:
        return exp.scene.snr_db
    return exp.snr_db


def _pair_scene(exp: ExperimentConfig, snr_db: float | None, rng: np.random.Generator) -> tuple[Scene, float, float]:
    phase_seed = int(rng.integers(2**31))
    if exp.preset == "custom" and exp.scene is not None:
        sc = exp.scene
        scene = Scene(sc.nodes, sc.targets, sc.eta, sc.noise_var, phase_seed, snr_db, sc.reciprocity)
        return scene, sc.nodes[1].delta_t - sc.nodes[0].delta_t, sc.nodes[1].delta_f - sc.nodes[0].delta_f
    dt = rng.normal(0.0, exp.to_std)
    df = rng.normal(0.0, exp.cfo_std)
    nodes = (NodeState(FIG3_NODES[0]), NodeState(FIG3_NODES[1], dt, df))
    return Scene(nodes, (Target((0.0, 0.0)),), noise_var=1.0, seed=phase_seed, snr_db=snr_db), dt, df


def _pair_trial(exp: ExperimentConfig, point: int, trial: int) -> dict[str, tuple[float, float]]:
    value = exp.sweep_values[point]
    ofdm = _point_ofdm(exp, value)
    rng = _trial_rng(exp, point, trial)
    scene, dt, df = _pair_scene(exp, _point_snr(exp, value), rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ICIWarning)
        fwd = measure_channel(scene, ofdm, 0, 1, rng)
        rev = measure_channel(scene, ofdm, 1, 0, rng)
    out = {}
    for name in exp.estimators:
        est = estimate_offsets(fwd, rev, ofdm, name, zero_pad=exp.zero_pad)
        out[name] = (est.delta_t - dt, est.delta_f - df)
    return out


def _pair_theory(exp: ExperimentConfig, value: float) -> tuple[float, float]:
    ofdm = _point_ofdm(exp, value)
    snr = _point_snr(exp, value)
    if exp.preset == "custom" and exp.scene is not None:
        from .signal_model import link_params

        sc = exp.scene if snr == exp.scene.snr_db else replace(exp.scene, snr_db=snr)
        gamma = float(np.sum(np.abs(link_params(sc, ofdm, 0, 1).beta) ** 2) / sc.noise_var)
    else:
        gamma = 10 ** (snr / 10)
    return (np.sqrt(crb_to(gamma, ofdm.P, ofdm.Q, ofdm.delta_f)),
            np.sqrt(crb_cfo(gamma, ofdm.P, ofdm.Q, ofdm.T)))


# -- network presets (fig7/8) -------------------------------------------------

def _network_scene(exp: ExperimentConfig, n_nodes: int, rng: np.random.Generator) -> Scene:
    mu = _point_mu(exp, n_nodes)
    if exp.deployment == "nearest":
        pos = deploy_nearest(mu, n_nodes, rng).positions
    else:
        side = np.sqrt(n_nodes / mu)
        pos = rng.uniform(-side / 2, side / 2, size=(n_nodes, 2))
    dt = rng.normal(0.0, exp.to_std, n_nodes)
    df = rng.normal(0.0, exp.cfo_std, n_nodes)
    nodes = tuple(NodeState((float(p[0]), float(p[1])), float(a), float(b)) for p, a, b in zip(pos, dt, df))
    return Scene(nodes, (Target((0.0, 0.0)),), eta=exp.eta, noise_var=1.0, seed=int(rng.integers(2**31)))


def _point_mu(exp: ExperimentConfig, n_nodes: int) -> float:
    return n_nodes / exp.area if exp.area else exp.mu


def _network_trial(exp: ExperimentConfig, point: int, trial: int) -> dict[str, tuple[float, float]]:
    n_nodes = int(exp.sweep_values[point])
    rng = _trial_rng(exp, point, trial)
    scene = _network_scene(exp, n_nodes, rng)
    noise_seed = int(rng.integers(2**31))
    out = {}
    d = target_distances(scene)
    out["crb_sum"] = cps_crb_sum(d, select_reference(d), exp.eta, 1.0, 1.0, exp.cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ICIWarning)
        for name in exp.estimators:
            res = synchronize_network(scene, exp.cfg, name, np.random.default_rng(noise_seed),
                                      zero_pad=exp.zero_pad)
            out[name] = (res.total_sq_error_t, res.total_sq_error_f)
    return out


# -- localisation preset (fig11) ----------------------------------------------

def _hcrb_geometry(exp: ExperimentConfig, n_nodes: int, trial: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([exp.seed, 1000 + n_nodes, trial]))
    target = np.zeros(2)
    while True:
        pos = deploy_nearest(exp.mu, n_nodes, rng).positions
        tv = link_tof_variances(pos, target, exp.eta, 1.0, 1.0, exp.cfg)
        try:
            localization_hcrb(LocalizationProblem(pos, target, tv, 0.0))
            for n in range(n_nodes):
                localization_hcrb(LocalizationProblem(pos, target, tv, exp.sweep_values[-1] ** 2,
                                                      "decentralized", n))
        except SingularFisherError:
            continue
        return pos, tv


def _run_hcrb(exp: ExperimentConfig) -> list[ResultRecord]:
    records = []
    for n_nodes in exp.n_nodes:
        geoms = [_hcrb_geometry(exp, n_nodes, t) for t in range(exp.trials)]
        sync = np.mean([localization_hcrb(LocalizationProblem(p, np.zeros(2), tv, 0.0)) for p, tv in geoms])
        for value in exp.sweep_values:
            var = float(value) ** 2
            vals = {"centralized": [], "decentralized": []}
            for pos, tv in geoms:
                prob = LocalizationProblem(pos, np.zeros(2), tv, var)
                vals["centralized"].append(localization_hcrb(prob))
                vals["decentralized"].append(decentralized_fused_hcrb(prob))
            for mode in exp.estimators:
                records.append(ResultRecord(exp.sweep_var, float(value), f"{mode}_n{n_nodes}", "crb_l_m2",
                                            float(np.mean(vals[mode])), float(sync), exp.trials, exp.seed))
    return records


# -- driver -------------------------------------------------------------------

def _run_point(args) -> list:
    exp, point = args
    fn = _network_trial if exp.preset in ("fig7", "fig8") else _pair_trial
    return [fn(exp, point, t) for t in range(exp.trials)]


def run_experiment(exp: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Run every sweep point, attach theory overlays, and write CSV if ``exp.out`` is set."""
    if exp.preset == "fig11":
        records = _run_hcrb(exp)
    else:
        jobs = [(exp, i) for i in range(len(exp.sweep_values))]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_point, jobs))
        else:
            results = [_run_point(j) for j in jobs]
        records = []
        for point, trials in enumerate(results):
            value = float(exp.sweep_values[point])
            if exp.preset in ("fig7", "fig8"):
                records += _network_records(exp, value, trials)
            else:
                records += _pair_records(exp, value, trials)
    records = sort_records(records)
    if exp.out:
        emit_csv(records, exp.out)
    return records


def _pair_records(exp: ExperimentConfig, value: float, trials: list[dict]) -> list[ResultRecord]:
    rc_t, rc_f = _pair_theory(exp, value)
    out = []
    for name in exp.estimators:
        err = np.array([t[name] for t in trials])
        rmse = np.sqrt(np.mean(err**2, axis=0))
        out.append(ResultRecord(exp.sweep_var, value, name, "rmse_to_s", float(rmse[0]), float(rc_t), exp.trials, exp.seed))
        out.append(ResultRecord(exp.sweep_var, value, name, "rmse_cfo_hz", float(rmse[1]), float(rc_f), exp.trials, exp.seed))
    return out


def _network_records(exp: ExperimentConfig, value: float, trials: list[dict]) -> list[ResultRecord]:
    n_nodes = int(value)
    bound = cps_bound(n_nodes, _point_mu(exp, n_nodes), exp.eta, 1.0, 1.0, exp.cfg)
    out = []
    for name in ("crb_sum",) + tuple(exp.estimators):
        tot = np.array([t[name] for t in trials])
        mean = np.nanmean(tot, axis=0)
        out.append(ResultRecord(exp.sweep_var, value, name, "total_var_to", float(mean[0]), bound.total_var_to, exp.trials, exp.seed))
        out.append(ResultRecord(exp.sweep_var, value, name, "total_var_cfo", float(mean[1]), bound.total_var_cfo, exp.trials, exp.seed))
    return out


def sort_records(records: Sequence[ResultRecord]) -> list[ResultRecord]:
    return sorted(records, key=lambda r: (r.sweep_value, r.estimator, r.metric))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_csv(records: Sequence[ResultRecord], path: str | Path) -> Path:
    """Write records with a fixed header, 17 significant digits, sorted rows."""
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in sort_records(records):
                w.writerow([r.sweep_var, _fmt(r.sweep_value), r.estimator, r.metric,
                            _fmt(r.value), _fmt(r.theory), r.trials, r.seed])
    except OSError as exc:
        raise ExperimentError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> list[ResultRecord]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [ResultRecord(r["sweep_var"], float(r["sweep_value"]), r["estimator"], r["metric"],
                         float(r["value"]), float(r["theory"]), int(r["trials"]), int(r["seed"]))
            for r in rows]
