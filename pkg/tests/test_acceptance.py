"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import warnings

import numpy as np
import pytest

from conftest import pair_scene
from oracles import empirical_noise_var, tone_fim_crb
from otasync.bsm import noise_stats
from otasync.config import OfdmConfig
from otasync.estimators import estimate_offsets
from otasync.harness import PRESETS, preset_config, run_experiment
from otasync.network import deploy_nearest
from otasync.signal_model import ICIWarning, synthesize_channel
from otasync.theory import crb_cfo, crb_to, expected_sq_distance

CFG = OfdmConfig()


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def db(x):
    return 10 * np.log10(x)


def by_key(records):
    return {(r.sweep_value, r.estimator, r.metric): r for r in records}


def test_c1_noiseless_exactness(report):
    rng = np.random.default_rng(0)
    bin_t = 1 / (CFG.P * CFG.delta_f)
    bin_f = 1 / (CFG.Q * CFG.T)
    worst = {"mle": 0.0, "mp": 0.0}
    # open interval (-1/(4 df), 1/(4 df)) and its Doppler analogue, plus points near the edges
    fr = np.concatenate([rng.uniform(-1, 1, size=(100, 2)), [[0.999, -0.999], [-0.999, 0.999], [0.5, 0.25]]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ICIWarning)
        for ft, ff in fr:
            dt, df = ft / (4 * CFG.delta_f), ff / (4 * CFG.T)
            s = pair_scene(dt, df)
            H = synthesize_channel(s, CFG, 0, 1), synthesize_channel(s, CFG, 1, 0)
            for m in worst:
                est = estimate_offsets(*H, CFG, m)
                err = max(abs(est.delta_t - dt) / bin_t, abs(est.delta_f - df) / bin_f)
                worst[m] = max(worst[m], err)
    ok = all(v < 1e-6 for v in worst.values())
    report(1, ok, f"worst error in bins over {len(fr)} offsets: MLE {worst['mle']:.2e}, MP {worst['mp']:.2e} (limit 1e-6)")


def test_c2_crb_oracle(report):
    worst = 0.0
    for P in (16, 64, 256):
        for Q in (8, 32, 128):
            for gamma in (0.1, 10.0, 1000.0):
                to = crb_to(gamma, P, Q, CFG.delta_f)
                cfo = crb_cfo(gamma, P, Q, CFG.T)
                o_to = tone_fim_crb(P, Q, gamma, "delay") / CFG.delta_f**2
                o_cfo = tone_fim_crb(P, Q, gamma, "doppler") / CFG.T**2
                worst = max(worst, abs(to / o_to - 1), abs(cfo / o_cfo - 1))
    report(2, worst < 0.01, f"max relative deviation from numeric FIM over 27 (P, Q, gamma) points: {worst:.2e} (limit 1e-2)")


def test_c3_estimator_efficiency(report):
    exp = preset_config("fig3", trials=200, seed=0)
    rec = by_key(run_experiment(exp))
    hi = max(exp.sweep_values)
    gaps = {(e, m): 20 * np.log10(rec[(hi, e, m)].value / rec[(hi, e, m)].theory)
            for e in ("mle", "mp") for m in ("rmse_to_s", "rmse_cfo_hz")}
    eff_ok = all(g < 3.0 for g in gaps.values())
    floor_pts = [v for v in exp.sweep_values if v >= 20]
    cc_t = [rec[(v, "cc", "rmse_to_s")].value for v in floor_pts]
    cc_f = [rec[(v, "cc", "rmse_cfo_hz")].value for v in floor_pts]
    floor_ok = all(500e-12 / 3 <= x <= 3 * 500e-12 for x in cc_t) and all(500 / 3 <= x <= 3 * 500 for x in cc_f)
    gap_txt = ", ".join(f"{e}/{m.split('_')[1]} {g:+.2f} dB" for (e, m), g in gaps.items())
    report(3, eff_ok and floor_ok,
           f"at {hi:g} dB gap to RCRB: {gap_txt} (limit 3 dB); CC floor over {floor_pts} dB: "
           f"TO {min(cc_t) * 1e12:.0f}-{max(cc_t) * 1e12:.0f} ps, CFO {min(cc_f):.0f}-{max(cc_f):.0f} Hz "
           f"(target 500 within x3)")


def test_c4_bsm_noise_statistics(report):
    rows = []
    for P, Q, beta_sq, sigma2, seed in ((64, 32, 1.0, 0.1, 1), (32, 16, 0.5, 1.0, 2)):
        cfg = OfdmConfig(P=P, Q=Q, bandwidth=P * CFG.delta_f)
        vt, vf = empirical_noise_var(cfg, np.sqrt(beta_sq), sigma2, 10_000, seed)
        ns = noise_stats([beta_sq / sigma2], P, Q, sigma2)
        rows.append((P, Q, beta_sq / sigma2, vt / ns.sigma_t_sq - 1, vf / ns.sigma_f_sq - 1))
    ok = all(abs(a) < 0.05 and abs(b) < 0.05 for *_, a, b in rows)
    txt = "; ".join(f"P={P} Q={Q} gamma={g:g}: t {a:+.2%}, f {b:+.2%}" for P, Q, g, a, b in rows)
    report(4, ok, f"empirical vs closed-form matched-signal noise variance over 1e4 trials: {txt} (limit 5%)")


def test_c5_scaling_laws(report):
    g = 10**2.5
    r_q_to = crb_to(g, 64, 32, CFG.delta_f) / crb_to(g, 64, 64, CFG.delta_f)
    r_q_cfo = crb_cfo(g, 64, 32, CFG.T) / crb_cfo(g, 64, 64, CFG.T)
    r_p_to = crb_to(g, 64, 32, CFG.delta_f) / crb_to(g, 128, 32, CFG.delta_f)
    closed_ok = (abs(r_q_to / 2 - 1) < 0.05 and abs(r_q_cfo / 8 - 1) < 0.05 and abs(r_p_to / 8 - 1) < 0.05)

    q_rec = by_key(run_experiment(preset_config("fig4", trials=200, seed=0)))
    qs = preset_config("fig4").sweep_values
    mono_q = all(
        np.all(np.diff([q_rec[(float(q), e, m)].value for q in qs]) < 0)
        for e in ("mle", "mp") for m in ("rmse_to_s", "rmse_cfo_hz"))
    b_exp = preset_config("fig5", trials=200, seed=0)
    b_rec = by_key(run_experiment(b_exp))
    bws = b_exp.sweep_values
    mono_b = all(np.all(np.diff([b_rec[(float(b), e, "rmse_to_s")].value for b in bws]) < 0) for e in ("mle", "mp"))
    gain = {m: b_rec[(float(bws[0]), "mle", m)].value / b_rec[(float(bws[-1]), "mle", m)].value
            for m in ("rmse_to_s", "rmse_cfo_hz")}
    faster = gain["rmse_to_s"] > gain["rmse_cfo_hz"]
    ok = closed_ok and mono_q and mono_b and faster
    report(5, ok,
           f"closed form: 2Q -> TO /{r_q_to:.3f}, CFO /{r_q_cfo:.3f}; 2B -> TO /{r_p_to:.3f}; "
           f"MC RMSE monotone in Q: {mono_q}, TO monotone in B: {mono_b}; "
           f"B x{bws[-1] / bws[0]:g} gain TO x{gain['rmse_to_s']:.1f} vs CFO x{gain['rmse_cfo_hz']:.1f}")


def test_c6_network_bound_tracking(report):
    Ns = (2, 3, 4, 5)
    dens = by_key(run_experiment(preset_config("fig7", trials=200, seed=0, sweep_values=Ns)))
    area = by_key(run_experiment(preset_config("fig8", trials=200, seed=0, sweep_values=Ns)))
    lines = []
    track_ok = True
    for m in ("total_var_to", "total_var_cfo"):
        gaps = {e: [db(dens[(float(n), e, m)].value / dens[(float(n), e, m)].theory) for n in Ns]
                for e in ("mle", "mp", "crb_sum")}
        track_ok &= all(0.0 <= x <= 3.0 for x in gaps["mle"])
        lines.append(f"{m.split('_')[-1]} over bound N=2..5: MLE " + "/".join(f"{x:+.2f}" for x in gaps["mle"])
                     + " dB (MP " + "/".join(f"{x:+.2f}" for x in gaps["mp"])
                     + ", exact CRB sum " + "/".join(f"{x:+.2f}" for x in gaps["crb_sum"]) + ")")
    flat_ok = True
    for m in ("total_var_to", "total_var_cfo"):
        vals = [area[(float(n), "mle", m)].value for n in Ns]
        spread = db(max(vals) / min(vals))
        flat_ok &= spread < 2.0
        mp_vals = [area[(float(n), "mp", m)].value for n in Ns]
        lines.append(f"fixed-area spread {m.split('_')[-1]}: MLE {spread:.2f} dB (MP {db(max(mp_vals) / min(mp_vals)):.2f})")
    report(6, track_ok and flat_ok, "; ".join(lines) + " (limits: MLE within [0, 3] dB of bound, spread < 2 dB)")


def test_c7_ppp_order_statistics(report):
    mu = 100e-6
    rng = np.random.default_rng(7)
    draws = 100_000
    r2 = np.empty((draws, 3))
    for i in range(draws):
        r2[i] = np.sum(deploy_nearest(mu, 3, rng).positions ** 2, axis=1)
    rel = [r2[:, i - 1].mean() / expected_sq_distance(i, mu) - 1 for i in (1, 2, 3)]
    ok = all(abs(x) < 0.02 for x in rel)
    report(7, ok, "E[R_i^2] sampled / (i / (mu pi)) - 1 for i=1,2,3: " + ", ".join(f"{x:+.2%}" for x in rel)
           + f" over {draws} draws (limit 2%)")


def test_c8_hcrb_behaviour(report):
    exp = preset_config("fig11", trials=50, seed=0)
    rec = by_key(run_experiment(exp))
    stds = exp.sweep_values
    ok = True
    parts = []
    for N in exp.n_nodes:
        cen = np.array([rec[(float(s), f"centralized_n{N}", "crb_l_m2")].value for s in stds])
        dec = np.array([rec[(float(s), f"decentralized_n{N}", "crb_l_m2")].value for s in stds])
        var = cen.max() / cen.min() - 1
        mono = bool(np.all(np.diff(dec) > 0))
        below = bool(np.all(cen <= dec))
        ok &= var < 0.2 and mono and below
        parts.append(f"N={N}: centralized variation {var:.2%}, decentralized increasing {mono} "
                     f"(x{dec[-1] / dec[0]:.1f}), centralized <= decentralized {below}")
    report(8, ok, "; ".join(parts) + " (limit variation < 20%)")


def test_c9_determinism(report, tmp_path):
    same = {}
    for name in PRESETS:
        kw = {"scene": pair_scene(2e-9, 300.0, noise_var=1.0, eta=1e8)} if name == "custom" else {}
        outs = []
        for run in range(2):
            out = tmp_path / f"{name}_{run}.csv"
            run_experiment(preset_config(name, trials=2, seed=11, out=str(out), **kw))
            outs.append(out.read_bytes())
        same[name] = outs[0] == outs[1]
    report(9, all(same.values()), "byte-identical CSV on repeat: " + ", ".join(f"{k} {v}" for k, v in same.items()))
