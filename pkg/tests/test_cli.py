"""End-to-end tests for the command-line driver."""

import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from flowimpact import BboSimConfig, simulate_bbo
from flowimpact.cli import build_manifest, load_config_file, main, resolve_config, build_parser

SMALL_SIM = "seconds_per_day = 3600\n"


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_simulate(tmp_path, out="sim", extra=(), config_text=SMALL_SIM):
    out_dir = tmp_path / out
    args = ["simulate", "--out-dir", str(out_dir), "--config",
            write_config(tmp_path, config_text)]
    rc = main(args + list(extra))
    assert rc == 0
    return out_dir


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def first_line(path):
    with open(path) as fh:
        return fh.readline().rstrip("\n")


def test_simulate_outputs_and_truth_sidecar(tmp_path):
    out = run_simulate(tmp_path)
    for name in ("bars.csv", "calendar.csv", "truth.json", "manifest.json"):
        assert (out / name).exists()
    manifest = read_manifest(out)
    tag = manifest["hash"]
    assert len(tag) == 12
    assert first_line(out / "bars.csv") == f"# run {tag}"
    truth = json.loads((out / "truth.json").read_text())
    assert truth["run"] == tag
    assert truth["price_impact"] == 0.8
    assert truth["flow_impact"] == 0.3
    assert truth["window_seconds"] == 900
    assert sorted(truth["days"]) == ["2024-01-01", "2024-01-02"]
    assert len(truth["days"]["2024-01-01"]["ret_vol_by_sub"]) == 12


def test_simulate_rerun_byte_identical(tmp_path):
    a = run_simulate(tmp_path, out="a")
    snap = {name: (a / name).read_bytes() for name in os.listdir(a)}
    # identical flags into the same directory must reproduce every byte
    rc = main(["simulate", "--out-dir", str(a), "--config",
               write_config(tmp_path, SMALL_SIM)])
    assert rc == 0
    assert set(os.listdir(a)) == set(snap)
    for name, blob in snap.items():
        assert (a / name).read_bytes() == blob, name


def test_flag_change_changes_hash(tmp_path):
    a = read_manifest(run_simulate(tmp_path, out="a"))
    b = read_manifest(run_simulate(tmp_path, out="b", extra=["--seed", "1"]))
    c = read_manifest(run_simulate(tmp_path, out="c", extra=["-q"]))
    assert a["hash"] != b["hash"]
    # even a pure logging flag is part of the resolved config, hence the hash
    assert a["hash"] != c["hash"]
    assert b["hash"] != c["hash"]


def test_config_file_overrides_flags(tmp_path):
    cfg_path = write_config(tmp_path, SMALL_SIM + "seed = 7\n")
    out = tmp_path / "o"
    assert main(["simulate", "--seed", "3", "--out-dir", str(out), "--config", cfg_path]) == 0
    manifest = read_manifest(out)
    assert manifest["config"]["seed"] == 7
    assert manifest["seed"] == 7


def test_unknown_config_key_fails(tmp_path, capsys):
    cfg_path = write_config(tmp_path, "not_a_key = 1\n")
    rc = main(["simulate", "--out-dir", str(tmp_path / "o"), "--config", cfg_path])
    assert rc == 1
    assert "not_a_key" in capsys.readouterr().err


def test_sim_override_rejected_outside_simulate(tmp_path, capsys):
    bars = run_simulate(tmp_path) / "bars.csv"
    cfg_path = write_config(tmp_path, SMALL_SIM, name="est.cfg")
    rc = main(["estimate", str(bars), "--out-dir", str(tmp_path / "e"), "--config", cfg_path])
    assert rc == 1
    assert "seconds_per_day" in capsys.readouterr().err


def test_config_file_parsing(tmp_path):
    path = write_config(
        tmp_path,
        "# comment\n\nseed = 5\nann_days = [0, 1]\nsession_open = 09:00:00\n",
    )
    entries = load_config_file(path)
    assert entries == {"seed": 5, "ann_days": [0, 1], "session_open": "09:00:00"}
    bad = write_config(tmp_path, "seed\n", name="bad.cfg")
    from flowimpact import ConfigError

    with pytest.raises(ConfigError, match="bad.cfg:1"):
        load_config_file(bad)


def test_estimate_roundtrip(tmp_path):
    sim = run_simulate(tmp_path)
    est = tmp_path / "est"
    rc = main([
        "estimate", str(sim / "bars.csv"), "--out-dir", str(est),
        "--max-lag", "2", "--jobs", "1",
    ])
    assert rc == 0
    manifest = read_manifest(est)
    assert manifest["windows"]["attempted"] == 8
    assert manifest["windows"]["attempted"] == (
        manifest["windows"]["estimated"] + manifest["windows"]["excluded"]
    )
    tag = manifest["hash"]
    panel = pd.read_csv(est / "panel.csv", comment="#")
    assert first_line(est / "panel.csv") == f"# run {tag}"
    assert len(panel) == manifest["windows"]["estimated"]
    assert panel["price_impact"].mean() == pytest.approx(0.8, abs=0.2)
    assert panel["flow_impact"].mean() == pytest.approx(0.3, abs=0.2)
    subs = pd.read_csv(est / "subintervals.csv", comment="#")
    assert len(subs) == 3 * len(panel)
    irf = pd.read_csv(est / "irf.csv", comment="#")
    assert set(irf["k"]) == set(range(11))
    for name in ("summary_params.csv", "summary_longrun.csv", "irf_summary.csv",
                 "params_windows.csv", "params_subintervals.csv", "exclusions.csv",
                 "params_intraday.png", "irf.png"):
        assert (est / name).exists(), name
    summary = pd.read_csv(est / "summary_params.csv", comment="#")
    assert list(summary.columns) == [
        "parameter", "mean", "sd", "p1", "p5", "p25", "p50", "p75", "p95", "p99", "share_sig",
    ]


def test_estimate_no_figures(tmp_path):
    sim = run_simulate(tmp_path)
    est = tmp_path / "est"
    rc = main([
        "estimate", str(sim / "bars.csv"), "--out-dir", str(est),
        "--max-lag", "1", "--no-figures", "-q",
    ])
    assert rc == 0
    assert not (est / "params_intraday.png").exists()
    assert not (est / "irf.png").exists()
    assert (est / "panel.csv").exists()


def test_estimate_with_calendar_regressions(tmp_path):
    sim = run_simulate(
        tmp_path,
        extra=["--days", "6"],
        config_text=SMALL_SIM + "ann_days = [1, 3]\nann_sub_index = 6\n",
    )
    cal = pd.read_csv(sim / "calendar.csv", comment="#")
    assert len(cal) == 2
    est = tmp_path / "est"
    rc = main([
        "estimate", str(sim / "bars.csv"), "--calendar", str(sim / "calendar.csv"),
        "--out-dir", str(est), "--max-lag", "1", "--jobs", "2",
    ])
    assert rc == 0
    for name in ("regression_price_impact.csv", "regression_flow_impact.csv",
                 "regression_ret_vol.csv", "regression_flow_vol.csv",
                 "regressions.txt", "announcement_windows.csv",
                 "announcement_subintervals.csv", "announcement.png"):
        assert (est / name).exists(), name
    reg = pd.read_csv(est / "regression_ret_vol.csv", comment="#")
    assert list(reg.columns) == ["term", "coef", "se", "p"]
    assert "ann_rel" in set(reg["term"])
    text = (est / "regressions.txt").read_text()
    assert text.startswith("# run ")
    assert "price_impact" in text and "clusters: 6" in text


def test_estimate_rerun_byte_identical_including_figures(tmp_path):
    sim = run_simulate(tmp_path)
    est = tmp_path / "est"
    args = ["estimate", str(sim / "bars.csv"), "--out-dir", str(est), "--max-lag", "1"]
    assert main(args) == 0
    snap = {name: (est / name).read_bytes() for name in os.listdir(est)}
    assert main(args) == 0
    for name, blob in snap.items():
        assert (est / name).read_bytes() == blob, name


def test_estimate_bad_input_no_partial_output(tmp_path, capsys):
    bad = tmp_path / "bars.csv"
    bad.write_text("")
    est = tmp_path / "est"
    rc = main(["estimate", str(bad), "--out-dir", str(est)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    assert not (est / "panel.csv").exists()
    assert not (est / "manifest.json").exists()


def test_ingest_from_quote_stream(tmp_path):
    events, truth = simulate_bbo(BboSimConfig(duration_seconds=120, seed=11))
    src = tmp_path / "quotes.csv"
    open_s = 8 * 3600 + 30 * 60
    with open(src, "w") as fh:
        fh.write("date,timestamp,sequence,bid_price,bid_size,ask_price,ask_size\n")
        for e in events:
            total = open_s + e.timestamp
            hh = int(total // 3600)
            mm = int((total % 3600) // 60)
            ss = total % 60
            fh.write(
                f"2024-01-02,{hh:02d}:{mm:02d}:{ss:09.6f},{e.sequence},"
                f"{e.bid_price},{e.bid_size},{e.ask_price},{e.ask_size}\n"
            )
    out = tmp_path / "ing"
    rc = main([
        "ingest", str(src), "--out-dir", str(out),
        "--session-open", "08:30:00", "--session-close", "08:32:00", "-q",
    ])
    assert rc == 0
    manifest = read_manifest(out)
    assert manifest["inputs"] == {"days": 1, "skipped_rows": 0}
    for name in ("bars.csv", "summary.csv", "intraday.csv", "activity.png"):
        assert (out / name).exists(), name
    bars = pd.read_csv(out / "bars.csv", comment="#")
    assert len(bars) == 120
    flow = bars["f_thousands"].to_numpy()
    want = truth.array("flow_thousands")
    assert flow == pytest.approx(want, abs=1e-9)


def test_summarize(tmp_path):
    sim = run_simulate(tmp_path)
    out = tmp_path / "sum"
    rc = main(["summarize", str(sim / "bars.csv"), "--out-dir", str(out),
               "--profile-sec", "600", "--no-figures"])
    assert rc == 0
    summary = pd.read_csv(out / "summary.csv", comment="#")
    assert list(summary.columns)[0] == "series"
    assert len(list(summary.columns)) == 10
    profile = pd.read_csv(out / "intraday.csv", comment="#")
    # 3600-second sessions at 600-second intervals leave six profile rows
    assert list(profile["interval"]) == list(range(6))
    assert not (out / "activity.png").exists()


def test_duplicate_date_across_inputs(tmp_path, capsys):
    sim = run_simulate(tmp_path)
    est = tmp_path / "est"
    rc = main([
        "estimate", str(sim / "bars.csv"), str(sim / "bars.csv"),
        "--out-dir", str(est),
    ])
    assert rc == 1
    assert "duplicate date" in capsys.readouterr().err


def test_version_and_help():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit):
        main([])  # a command is required


def test_manifest_hash_covers_out_dir(tmp_path):
    parser = build_parser()
    a = resolve_config(parser.parse_args(["simulate", "--out-dir", "x"]))
    b = resolve_config(parser.parse_args(["simulate", "--out-dir", "y"]))
    assert build_manifest(a)["hash"] != build_manifest(b)["hash"]
    assert build_manifest(a)["hash"] == build_manifest(a)["hash"]
