import math

import numpy as np
import pytest

from vecdrive import cli
from vecdrive.config import ScenarioConfig, config_from_entries
from vecdrive.errors import ConfigError, SimulationError
from vecdrive.foc import FocConfig, FocState, foc_step
from vecdrive.harness import (TRACE_COLUMNS, ScenarioSummary, Trace, compare, export_csv,
                              frequency_excess, read_csv, read_kv, run_scenario,
                              summary_from_entries, summary_to_entries, write_kv)
from vecdrive.inverter import output_voltage
from vecdrive.machine import MotorParams, MotorState, clarke, derive_currents, step
from vecdrive.metrics import RippleStats


def short(controller="dtc", **kw):
    base = dict(controller=controller, duration=0.3, steady_window=0.2, trace_decimation=10)
    base.update(kw)
    return config_from_entries(base)


@pytest.fixture(scope="module")
def dtc_run():
    return run_scenario(short("dtc", trace_decimation=1))


def test_zero_duration_guard(tmp_path):
    res = run_scenario(ScenarioConfig(duration=5e-6))
    assert len(res.trace) == 1
    assert math.isnan(res.trace["f_sw"][0])
    assert res.summary.window_frequencies == ()
    assert math.isnan(res.summary.f_sw_median)
    path = tmp_path / "one.csv"
    export_csv(res.trace, path)
    header, row = path.read_text().splitlines()
    assert row.split(",")[TRACE_COLUMNS.index("f_sw")] == ""


@pytest.mark.parametrize("duration", [0.01, 0.012345, 0.0104999])
def test_controller_call_count(duration):
    res = run_scenario(ScenarioConfig(controller="foc", duration=duration, trace_decimation=1))
    assert res.controller_calls == math.floor(duration / 50e-6 + 1e-9)


def test_switch_state_held_between_controller_calls(dtc_run):
    tr = dtc_run.trace
    sw = np.stack([tr["s_a"], tr["s_b"], tr["s_c"]], axis=1)
    changed = np.flatnonzero(np.any(sw[1:] != sw[:-1], axis=1)) + 1
    assert len(changed) > 100
    steps = np.rint(tr["t"][changed] / 5e-6).astype(int)
    assert np.all(steps % 10 == 0)


def test_decimation_does_not_change_frequencies(dtc_run):
    coarse = run_scenario(short("dtc", trace_decimation=37))
    assert coarse.summary.window_frequencies == dtc_run.summary.window_frequencies
    assert coarse.summary.f_sw_median == dtc_run.summary.f_sw_median
    assert coarse.summary.ripple == dtc_run.summary.ripple
    fine_t = set(dtc_run.trace["t"].tolist())
    assert set(coarse.trace["t"].tolist()) <= fine_t


def test_window_frequencies_cover_run(dtc_run):
    windows = dtc_run.summary.window_frequencies
    assert [round(e, 9) for _, e, _ in windows] == [0.1, 0.2, 0.3]
    assert all(f > 0 for _, _, f in windows)


def test_deterministic_csv(tmp_path):
    cfg = short("foc", duration=0.1)
    export_csv(run_scenario(cfg).trace, tmp_path / "a.csv")
    export_csv(run_scenario(cfg).trace, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_schema_and_round_trip(tmp_path, dtc_run):
    path = tmp_path / "t.csv"
    export_csv(dtc_run.trace, path)
    lines = path.read_text().split("\n")
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert lines[-1] == ""
    assert all(len(line.split(",")) == 13 for line in lines[:-1])
    back = read_csv(path)
    for name in TRACE_COLUMNS:
        np.testing.assert_allclose(back[name], dtc_run.trace[name], rtol=5e-9, equal_nan=True)


def test_empty_trace_exports_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    export_csv(Trace.empty(), path)
    assert path.read_text() == ",".join(TRACE_COLUMNS) + "\n"
    assert len(read_csv(path)) == 0


def test_frequency_excess_examples():
    assert frequency_excess(1400, 900) == pytest.approx(55.5556, abs=1e-4)
    assert frequency_excess(900, 900) == 0.0
    assert frequency_excess(1300, 800) == pytest.approx(62.5)


def _summary(controller, f, p2p=1.0, speed=1500.0, profile=((0.0, 0.0),)):
    return ScenarioSummary(controller, speed, profile, f, RippleStats(10.0, p2p, p2p / 4, (2, 3)),
                           0.0, 0.5, ())


def test_compare_examples():
    rep = compare(_summary("dtc", 900.0, 4.0), _summary("foc", 1400.0, 2.0))
    assert rep.percent_excess == pytest.approx(55.5556, abs=1e-4)
    assert rep.ripple_ratio == pytest.approx(2.0)
    assert rep.foc.controller == "foc"
    loaded = ((0.0, 0.0), (1.5, 10.0))
    rep = compare(_summary("foc", 1300.0, profile=loaded), _summary("dtc", 800.0, profile=loaded))
    assert rep.percent_excess == pytest.approx(62.5)
    assert compare(_summary("foc", 700.0), _summary("dtc", 700.0)).percent_excess == 0.0


@pytest.mark.parametrize("a,b", [
    (_summary("foc", 1.0), _summary("foc", 1.0)),
    (_summary("foc", 1.0, speed=1400.0), _summary("dtc", 1.0)),
    (_summary("foc", 1.0), _summary("dtc", 1.0, profile=((0.0, 0.0), (1.5, 10.0)))),
])
def test_compare_rejects_mismatched_runs(a, b):
    with pytest.raises(ConfigError):
        compare(a, b)


def test_summary_kv_round_trip(tmp_path, dtc_run):
    path = tmp_path / "s.summary"
    write_kv(summary_to_entries(dtc_run.summary), path, "test")
    back = summary_from_entries(read_kv(path))
    s = dtc_run.summary
    assert back.f_sw_median == pytest.approx(s.f_sw_median, rel=1e-8)
    assert back.ripple.peak_to_peak == pytest.approx(s.ripple.peak_to_peak, rel=1e-8)
    assert back.load_profile == s.load_profile
    assert back.bands == pytest.approx(s.bands)
    assert len(back.window_frequencies) == len(s.window_frequencies)


def test_numerical_blow_up_reports_time():
    # a far too large step with a stiff machine diverges; the error names the time
    cfg = config_from_entries({"plant_dt": 1e-4, "ctrl_dt": 1e-4, "duration": 0.2,
                               "motor.L_s": 0.4401, "motor.L_r": 0.4401})
    with pytest.raises(SimulationError, match="at t="):
        run_scenario(cfg)


# ---------------------------------------------------------------------------
# command line

def test_cli_simulate_and_compare(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("duration = 0.2\nsteady_window = 0.1\n")
    foc_csv, dtc_csv = tmp_path / "foc.csv", tmp_path / "dtc.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--controller", "foc",
                     "--load-torque", "5", "--out", str(foc_csv)]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--controller", "dtc",
                     "--load-torque", "5", "--out", str(dtc_csv), "--no-figures"]) == 0
    for suffix in (".csv", ".config", ".summary", ".png"):
        assert foc_csv.with_suffix(suffix).exists()
    effective = foc_csv.with_suffix(".config").read_text()
    assert "load_profile = 0:0, 0.1:5" in effective
    assert "controller = foc" in effective
    capsys.readouterr()
    # CSV + sidecar config on one side, summary file on the other
    assert cli.main(["compare", "--a", str(foc_csv), "--b", str(dtc_csv.with_suffix(".summary")),
                     "--out", str(tmp_path / "r.kv")]) == 0
    out = capsys.readouterr().out
    assert "FOC frequency excess" in out
    kv = read_kv(tmp_path / "r.kv")
    from_csv = float(kv["foc.f_sw_median"])
    from_summary = float(read_kv(foc_csv.with_suffix(".summary"))["f_sw_median"])
    assert from_csv == pytest.approx(from_summary)


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = tmp_path / "bad.cfg"
    bad.write_text("ctrl_dt = 5e-5\nplant_dt = 1.5e-5\n")
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 1
    assert cli.main(["compare", "--a", str(tmp_path / "missing.summary"),
                     "--b", str(tmp_path / "missing2.summary")]) == 3

    def explode(config):
        raise SimulationError("non-finite plant state", 0.25)

    monkeypatch.setattr(cli, "run_scenario", explode)
    ok = tmp_path / "ok.cfg"
    ok.write_text("duration = 0.01\n")
    assert cli.main(["simulate", "--config", str(ok), "--out", str(tmp_path / "y.csv")]) == 2


# ---------------------------------------------------------------------------
# closed-loop behaviour

def test_foc_keeps_rotor_flux_oriented():
    """Indirect FOC under load: the integrated angle tracks the plant rotor
    flux, the measured slip matches the commanded slip and the commanded
    rotor flux magnitude is reached."""
    params = MotorParams()
    cfg = FocConfig(lambda_r_ref=0.75, i_band=0.3)
    st = FocState.initial(cfg)
    state = MotorState()
    dt, ratio = 5e-6, 10
    sw = st.switch
    angle_err, mag, rotor_angle, speed, slip = [], [], [], [], []
    for k in range(1, 160_001):
        load = 10.0 if k * dt >= 0.4 else 0.0
        state = step(state, output_voltage(sw, params.V_dc), load, dt, params)
        if k % ratio == 0:
            i_s, _ = derive_currents(state, params)
            i_abc = (i_s.alpha, -0.5 * i_s.alpha + math.sqrt(3) / 2 * i_s.beta,
                     -0.5 * i_s.alpha - math.sqrt(3) / 2 * i_s.beta)
            sw = foc_step(2 * math.pi * 1500 / 60, state.omega_m, i_abc, cfg, st, params)
            if k * dt > 0.6:
                # theta locates the q axis; the d axis (rotor flux) lags it by 90 deg
                rotor = math.atan2(state.lam_r_beta, state.lam_r_alpha)
                d = (rotor - (st.theta - math.pi / 2) + math.pi) % (2 * math.pi) - math.pi
                angle_err.append(d)
                mag.append(math.hypot(state.lam_r_alpha, state.lam_r_beta))
                rotor_angle.append(rotor)
                speed.append(state.omega_m)
                slip.append(st.omega_sl)
    assert st.omega_sl > 0
    span = (len(rotor_angle) - 1) * ratio * dt
    turns = np.unwrap(rotor_angle)
    measured_slip = (turns[-1] - turns[0]) / span - params.p * np.mean(speed)
    assert measured_slip == pytest.approx(np.mean(slip), rel=0.02)
    assert max(abs(e) for e in angle_err) < math.radians(5)
    assert np.mean(mag) == pytest.approx(cfg.lambda_r_ref, rel=0.03)


def test_foc_no_load_current_is_magnetizing():
    cfg = config_from_entries({"controller": "foc", "duration": 0.6, "steady_window": 0.2,
                               "trace_decimation": 1, "foc.i_band": 0.3,
                               "foc.lambda_r_ref": 0.75})
    res = run_scenario(cfg)
    tr = res.trace
    sel = tr["t"] > 0.4
    i_ab = clarke(tr["i_a"][sel], tr["i_b"][sel], tr["i_c"][sel])
    # the magnetizing current dominates at no load
    i_mag = np.hypot(i_ab.alpha, i_ab.beta)
    assert np.median(i_mag) == pytest.approx(0.75 / 0.44, rel=0.1)
    assert abs(res.summary.speed_error_pct) < 1.0


def test_dtc_holds_flux_and_torque_bands(dtc_run):
    cfg = dtc_run.config
    tr = dtc_run.trace
    sel = tr["t"] > 0.15
    lam = tr["lambda"][sel]
    # overshoot per period is bounded by one active vector applied for T_ctrl
    slack = 2 / 3 * cfg.motor.V_dc * cfg.ctrl_dt
    assert np.all(np.abs(lam - cfg.dtc.lambda_ref) <= cfg.dtc.flux_band + slack)
    assert abs(np.mean(lam) - cfg.dtc.lambda_ref) < cfg.dtc.flux_band
    err = tr["T_ref"][sel] - tr["T_e"][sel]
    assert np.mean(np.abs(err) <= 2 * cfg.dtc.torque_band) > 0.95
