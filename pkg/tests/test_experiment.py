import math
import os

import numpy as np
import pytest

from otasync.cli import cli_main
from otasync.config import ConfigError, default_params, dump_config
from otasync.experiment import ResultRow, SweepSpec, cell_seed, emit_csv, fig2_sweep, \
    fig3_sweep, parse_result_csv, parse_sweep, run_sweep

QUICK = SweepSpec(f_values=(1, 2), schemes=("kalman", "direct", "ap1_only"),
                  snr_ap_db=(-15.0,), n_realizations=300, master_seed=9)


def _strip_wall_time(csv_text):
    lines = csv_text.strip().splitlines()
    return [",".join(ln.split(",")[:-1]) for ln in lines]


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec(f_values=())
    with pytest.raises(ConfigError):
        SweepSpec(f_values=(1,), schemes=("zeroforcing",))
    with pytest.raises(ConfigError):
        SweepSpec(f_values=(1,), n_realizations=0)


def test_fig_presets():
    f2 = fig2_sweep(n_realizations=100)
    assert f2.f_values == tuple(range(1, 11))
    assert f2.snr_ap_db == (-15.0, -20.0)
    assert f2.c_nu_values == (5e-18,)
    f3 = fig3_sweep(n_realizations=100)
    assert f3.c_nu_values == (1.58e-17,)


def test_parse_sweep_roundtrip():
    text = "f_values = 1,2,3\nschemes = kalman,direct\nsnr_ap_db = -15,-20\n" \
           "n_realizations = 50\nmaster_seed = 4\n"
    spec = parse_sweep(text)
    assert spec.f_values == (1, 2, 3)
    assert spec.schemes == ("kalman", "direct")
    assert spec.snr_ap_db == (-15.0, -20.0)
    assert spec.n_realizations == 50


def test_parse_sweep_errors():
    with pytest.raises(ConfigError):
        parse_sweep("frames = 1,2")
    with pytest.raises(ConfigError):
        parse_sweep("f_values = one")
    with pytest.raises(ConfigError):
        parse_sweep("n_realizations = 10")  # f_values missing


def test_cell_seed_scheme_independent():
    assert cell_seed(1, 0, 0, 5) == cell_seed(1, 0, 0, 5)
    assert cell_seed(1, 0, 0, 5) != cell_seed(1, 0, 1, 5)
    assert cell_seed(1, 0, 0, 5) != cell_seed(2, 0, 0, 5)


def test_run_sweep_row_grid(params):
    rows = run_sweep(QUICK, params)
    # 2 synced schemes x 1 SNR x 2 F + ap1_only x 2 F
    assert len(rows) == 6
    ap1 = [r for r in rows if r.scheme == "ap1_only"]
    assert len(ap1) == 2 and all(math.isnan(r.snr_ap_db) for r in ap1)
    assert all(r.se_mean >= 0 for r in rows)
    assert all(r.n_realizations == 300 for r in rows)


def test_zero_drift_makes_schemes_coincide(params):
    # no oscillator drift and a very strong inter-array link: SE independent
    # of scheme and of F
    spec = SweepSpec(f_values=(1, 4), schemes=("kalman", "direct"),
                     snr_ap_db=(70.0,), c_nu_values=(0.0,),
                     n_realizations=200, master_seed=2)
    rows = run_sweep(spec, params)
    ses = np.array([r.se_mean for r in rows])
    assert np.max(ses) - np.min(ses) < 0.02


def test_emit_csv_shape():
    assert emit_csv([]).strip().splitlines() == [
        "scheme,frame_len,snr_ap_db,c_nu,se_mean,se_stderr,n_realizations,wall_time_s"]
    row = ResultRow(scheme="kalman", frame_len=2, snr_ap_db=-15.0, c_nu=5e-18,
                    se_mean=1.2517, se_stderr=0.002, n_realizations=100, wall_time_s=0.5)
    text = emit_csv([row])
    assert len(text.strip().splitlines()) == 2
    parsed = parse_result_csv(text)[0]
    assert parsed.se_mean == pytest.approx(1.2517, rel=1e-6)
    assert parsed.frame_len == 2


def test_csv_six_significant_digits():
    row = ResultRow(scheme="direct", frame_len=1, snr_ap_db=-20.0, c_nu=1.58e-17,
                    se_mean=1.23456789, se_stderr=0.00123456789, n_realizations=10,
                    wall_time_s=1.0)
    line = emit_csv([row]).strip().splitlines()[1]
    assert "1.23457" in line and "0.00123457" in line and "1.58e-17" in line


def test_sweep_determinism(params):
    spec = SweepSpec(f_values=(1,), schemes=("kalman",), snr_ap_db=(-15.0,),
                     n_realizations=300, master_seed=5)
    a = emit_csv(run_sweep(spec, params))
    b = emit_csv(run_sweep(spec, params))
    assert _strip_wall_time(a) == _strip_wall_time(b)


def test_sweep_worker_invariance(params):
    base = SweepSpec(f_values=(1,), schemes=("direct",), snr_ap_db=(-15.0,),
                     n_realizations=2100, master_seed=6, n_workers=1)
    import dataclasses
    multi = dataclasses.replace(base, n_workers=2)
    a = run_sweep(base, params)[0]
    b = run_sweep(multi, params)[0]
    assert a.se_mean == b.se_mean  # bit-identical reduction


def test_cli_default_run(tmp_path):
    out = tmp_path / "res.csv"
    code = cli_main(["--out", str(out), "--realizations", "100", "--seed", "3",
                     "--scheme", "kalman"])
    assert code == 0
    rows = parse_result_csv(out.read_text())
    assert len(rows) == 3  # default sweep F=1..3, one scheme


def test_cli_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["--realizations", "150", "--seed", "7", "--workers", "1", "--scheme", "direct"]
    assert cli_main(args + ["--out", str(a)]) == 0
    assert cli_main(args + ["--out", str(b)]) == 0
    assert _strip_wall_time(a.read_text()) == _strip_wall_time(b.read_text())


def test_cli_config_and_sweep_files(tmp_path):
    cfg = tmp_path / "sys.cfg"
    cfg.write_text(dump_config(default_params(n_antennas=16)))
    sweep = tmp_path / "sweep.cfg"
    sweep.write_text("f_values = 1\nschemes = ap1_only\nn_realizations = 80\n")
    out = tmp_path / "r.csv"
    assert cli_main(["--config", str(cfg), "--sweep", str(sweep), "--out", str(out)]) == 0
    rows = parse_result_csv(out.read_text())
    assert len(rows) == 1 and rows[0].scheme == "ap1_only"


def test_cli_stdout_when_no_out(capsys):
    code = cli_main(["--realizations", "60", "--scheme", "ap1_only"])
    assert code == 0
    cap = capsys.readouterr()
    assert cap.out.startswith("scheme,frame_len")


def test_cli_usage_error():
    assert cli_main(["--no-such-flag"]) == 1
    assert cli_main(["--fig2", "--fig3"]) == 1


def test_cli_bad_config(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("tau_p = 7\n")
    assert cli_main(["--config", str(cfg)]) == 2
    assert cli_main(["--config", str(tmp_path / "missing.cfg")]) == 2


def test_cli_bad_sweep(tmp_path):
    sw = tmp_path / "bad.sweep"
    sw.write_text("schemes = zf\nf_values = 1\n")
    assert cli_main(["--sweep", str(sw), "--out", os.devnull]) == 2


def test_cli_dump_plan(tmp_path):
    out = tmp_path / "plan.csv"
    assert cli_main(["--dump-plan", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,ap1_label,ap2_label,a1,a2"
    assert len(lines) == 101


def test_cli_dump_trace(tmp_path):
    out = tmp_path / "trace.csv"
    assert cli_main(["--dump-trace", "--trace-frames", "25", "--seed", "2",
                     "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,obs,alpha_hat,p_var,kappa,alpha_true"
    assert len(lines) == 26


def test_fig2_preset_row_grid(tmp_path):
    # 2 synced schemes x 2 SNRs x F=1..10 plus the SNR-independent baseline
    out = tmp_path / "fig2.csv"
    assert cli_main(["--fig2", "--realizations", "20", "--out", str(out)]) == 0
    rows = parse_result_csv(out.read_text())
    assert len(rows) == 50
    assert sum(r.scheme == "ap1_only" for r in rows) == 10
    assert sum(r.scheme == "kalman" for r in rows) == 20


def test_delta_and_rate_dumps(params):
    from otasync.compensation import monte_carlo_delta, build_plan
    from otasync.rate import dump_rate_csv
    stats = monte_carlo_delta(params, "direct", 100, 1)
    lines = stats.dump_csv().strip().splitlines()
    assert lines[0] == "position,ap,re_mean,im_mean,abs_mean"
    assert len(lines) == 1 + 80  # 40 payload positions per AP
    plan = build_plan(params, "direct")
    rlines = dump_rate_csv(params, plan, stats).strip().splitlines()
    assert rlines[0] == "n,k,ds,bu,ui,rate"
    assert len(rlines) == 1 + 43 * params.n_ues


def test_trajectory_debug_dump():
    from otasync.phase_noise import dump_trajectories_csv, generate_trajectory
    t1 = generate_trajectory(1, 5, 1e-5, ap_id=1)
    t2 = generate_trajectory(2, 5, 1e-5, ap_id=2)
    lines = dump_trajectories_csv(t1, t2).strip().splitlines()
    assert lines[0] == "index,nu_1,nu_2"
    assert len(lines) == 6
