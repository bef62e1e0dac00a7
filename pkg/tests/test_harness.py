import numpy as np
import pytest

from conftest import pair_scene
from otasync.config import OfdmConfig
from otasync.harness import (
    CSV_COLUMNS,
    PRESETS,
    ExperimentConfig,
    ExperimentError,
    ResultRecord,
    emit_csv,
    preset_config,
    read_csv,
    run_experiment,
)
from otasync.theory import cps_bound, crb_cfo, crb_to


def rec(v, est="mle", metric="rmse_to_s", value=1.0):
    return ResultRecord("snr_db", v, est, metric, value, 0.1, 5, 0)


class TestConfig:
    def test_unknown_preset(self):
        with pytest.raises(ExperimentError):
            preset_config("fig9")

    def test_zero_trials(self):
        with pytest.raises(ExperimentError):
            preset_config("fig3", trials=0)

    def test_empty_sweep(self):
        with pytest.raises(ExperimentError):
            ExperimentConfig("fig3", "snr_db", ())

    def test_bad_deployment(self):
        with pytest.raises(ExperimentError):
            preset_config("fig7", deployment="hexagonal")

    @pytest.mark.parametrize("name", PRESETS)
    def test_presets_build(self, name):
        exp = preset_config(name, trials=3)
        assert exp.trials == 3 and len(exp.sweep_values) > 0
        assert exp.cfg == OfdmConfig()

    def test_eta_from_reference_snr(self):
        exp = preset_config("fig7")
        assert exp.eta / 50.0**4 == pytest.approx(10**1.7)


class TestCsv:
    def test_three_rows(self, tmp_path):
        p = emit_csv([rec(3.0), rec(1.0), rec(2.0)], tmp_path / "r.csv")
        lines = p.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 4
        assert [float(l.split(",")[1]) for l in lines[1:]] == [1.0, 2.0, 3.0]

    def test_empty(self, tmp_path):
        p = emit_csv([], tmp_path / "e.csv")
        assert p.read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        records = [ResultRecord("snr_db", float(v), e, "rmse_cfo_hz", float(rng.lognormal()), float(rng.lognormal()), 7, 3)
                   for v in rng.normal(size=4) for e in ("mp", "cc")]
        back = read_csv(emit_csv(records, tmp_path / "rt.csv"))
        assert sorted(back, key=repr) == sorted(records, key=repr)

    def test_seventeen_digits(self, tmp_path):
        p = emit_csv([rec(0.1, value=1 / 3)], tmp_path / "d.csv")
        assert "0.33333333333333331" in p.read_text()

    def test_row_order(self, tmp_path):
        p = emit_csv([rec(1.0, "mp"), rec(1.0, "cc"), rec(0.5, "mle")], tmp_path / "o.csv")
        ests = [l.split(",")[2] for l in p.read_text().splitlines()[1:]]
        assert ests == ["mle", "cc", "mp"]

    def test_creates_parent(self, tmp_path):
        assert emit_csv([], tmp_path / "a" / "b" / "c.csv").exists()

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ExperimentError, match=str(blocker)):
            emit_csv([rec(1.0)], blocker / "out.csv")


class TestRun:
    def test_fig3_records_and_theory(self):
        exp = preset_config("fig3", trials=4, sweep_values=(10.0, 20.0))
        records = run_experiment(exp)
        keys = {(r.sweep_value, r.estimator, r.metric) for r in records}
        assert len(keys) == len(records) == 2 * 3 * 2
        for r in records:
            g = 10 ** (r.sweep_value / 10)
            expect = (np.sqrt(crb_to(g, 64, 32, exp.cfg.delta_f)) if r.metric == "rmse_to_s"
                      else np.sqrt(crb_cfo(g, 64, 32, exp.cfg.T)))
            assert r.theory == pytest.approx(expect)
            assert r.value > 0 and r.trials == 4

    def test_fig7_theory_is_network_bound(self):
        exp = preset_config("fig7", trials=2, sweep_values=(3,))
        records = run_experiment(exp)
        b = cps_bound(3, exp.mu, exp.eta, 1.0, 1.0, exp.cfg)
        for r in records:
            assert r.theory == (b.total_var_to if r.metric == "total_var_to" else b.total_var_cfo)
        assert {r.estimator for r in records} == {"crb_sum", "mle", "mp"}

    def test_fig8_fixed_area(self):
        exp = preset_config("fig8", trials=2, sweep_values=(2, 4))
        recs = {(r.sweep_value, r.metric): r.theory for r in run_experiment(exp) if r.estimator == "mle"}
        assert recs[(2.0, "total_var_to")] == pytest.approx(
            cps_bound(2, 2 / 200.0**2, exp.eta, 1, 1, exp.cfg).total_var_to)

    def test_fig11_structure(self):
        exp = preset_config("fig11", trials=3, sweep_values=(1e-12, 1e-9))
        records = run_experiment(exp)
        assert {r.metric for r in records} == {"crb_l_m2"}
        assert {r.estimator for r in records} == {"centralized_n2", "centralized_n3",
                                                  "decentralized_n2", "decentralized_n3"}

    def test_fig5_bandwidth_points(self):
        exp = preset_config("fig5", trials=2, sweep_values=(781250.0 * 32,))
        r = [r for r in run_experiment(exp) if r.estimator == "mle" and r.metric == "rmse_to_s"][0]
        assert r.theory == pytest.approx(np.sqrt(crb_to(10**2.5, 32, 32, 781250.0)))

    def test_custom_scene(self):
        exp = preset_config("custom", trials=3, scene=pair_scene(3e-9, 500.0, noise_var=1.0, eta=1e8))
        records = run_experiment(exp)
        assert {r.estimator for r in records} == {"cc", "mle", "mp"}
        mle_t = [r for r in records if r.estimator == "mle" and r.metric == "rmse_to_s"][0]
        assert mle_t.value < 1e-9

    def test_writes_out(self, tmp_path):
        out = tmp_path / "fig4.csv"
        run_experiment(preset_config("fig4", trials=1, sweep_values=(16,), out=str(out)))
        assert len(read_csv(out)) == 4

    @pytest.mark.parametrize("name", ["fig3", "fig7", "fig11"])
    def test_determinism(self, name, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(preset_config(name, trials=1, seed=5, out=str(a)))
        run_experiment(preset_config(name, trials=1, seed=5, out=str(b)))
        assert a.read_bytes() == b.read_bytes()

    def test_seed_matters(self):
        a = run_experiment(preset_config("fig3", trials=2, seed=1, sweep_values=(20.0,)))
        b = run_experiment(preset_config("fig3", trials=2, seed=2, sweep_values=(20.0,)))
        assert [r.value for r in a] != [r.value for r in b]

    def test_workers_do_not_change_output(self):
        exp = preset_config("fig4", trials=2, sweep_values=(8, 16))
        assert run_experiment(exp, workers=1) == run_experiment(exp, workers=2)
