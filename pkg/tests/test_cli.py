import json

import numpy as np
import pytest

from mdantenna.bfp import load_measurement, render_bfp, save_image
from mdantenna.cli import main
from mdantenna.presets import antenna_stack
from mdantenna.radiation import DipoleEmitter, angular_pattern

UNIFORM_STACK = {"layers": [
    {"name": "glass", "n": 1.5, "thickness_nm": "semi-infinite"},
    {"name": "film", "n": 1.5, "thickness_nm": 400.0},
    {"name": "glass", "n": 1.5, "thickness_nm": "semi-infinite"},
]}


def run(tmp_path, command, cfg, tag="o", *flags):
    cfg_path = tmp_path / f"cfg_{tag}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{tag}"
    code = main([command, "--config", str(cfg_path), "--out", str(out),
                 *flags])
    return code, out


def tree_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


# ---------------------------------------------------------------------------
# pattern

def test_pattern_uniform_stack_splits_half(tmp_path, capsys):
    cfg = {"stack": UNIFORM_STACK,
           "pattern": {"na": 1.5, "theta_samples": 16, "phi_samples": 8}}
    code, out = run(tmp_path, "pattern", cfg)
    assert code == 0
    for name in ("pattern.csv", "profile.csv", "budget.json"):
        assert (out / name).exists()
    budget = json.loads((out / "budget.json").read_text())["budget"]
    assert budget["collected_na"] == pytest.approx(0.5, abs=1e-6)
    assert budget["absorbed"] == pytest.approx(0.0, abs=1e-6)
    printed = json.loads(capsys.readouterr().out)
    assert printed["collected_na"] == budget["collected_na"]


def test_pattern_outputs_embed_config_and_rerun_identical(tmp_path):
    cfg = {"stack": UNIFORM_STACK, "seed": 5,
           "pattern": {"na": 1.2, "theta_samples": 16, "phi_samples": 8}}
    code1, out1 = run(tmp_path, "pattern", cfg, "a")
    code2, out2 = run(tmp_path, "pattern", cfg, "b")
    assert code1 == code2 == 0
    assert tree_bytes(out1) == tree_bytes(out2)
    header = (out1 / "pattern.csv").read_text().splitlines()[0]
    assert header.startswith("# config: ")
    resolved = json.loads(header[len("# config: "):])
    assert resolved["pattern"]["na"] == 1.2
    assert resolved["emitter"]["weights"] == [0.31, 0.345, 0.345]


# ---------------------------------------------------------------------------
# bfp

def test_bfp_emits_polarizer_series(tmp_path, capsys):
    cfg = {"stack": {"preset": "antenna"},
           "bfp": {"grid_size": 64, "na_limit": 1.65,
                   "polarizer_deg": [0.0, 30.0, 60.0, 90.0, 120.0, 150.0]}}
    code, out = run(tmp_path, "bfp", cfg)
    assert code == 0
    names = sorted(p.name for p in out.iterdir() if p.suffix == ".png")
    assert names == ["bfp_pol0.png", "bfp_pol120.png", "bfp_pol150.png",
                     "bfp_pol30.png", "bfp_pol60.png", "bfp_pol90.png",
                     "bfp_unpolarized.png"]
    listed = json.loads(capsys.readouterr().out)["images"]
    assert len(listed) == 7

    unpol = load_measurement(str(out / "bfp_unpolarized.png"))
    p0 = load_measurement(str(out / "bfp_pol0.png"))
    p90 = load_measurement(str(out / "bfp_pol90.png"))
    # orthogonal polarizer images rebuild the unpolarized one up to the
    # 16-bit quantization of the three files
    tol = (0.5 * (p0.pixels.max() + p90.pixels.max() + unpol.pixels.max())
           / 65535.0)
    assert np.max(np.abs(p0.pixels + p90.pixels - unpol.pixels)) <= tol
    meta = json.loads((out / "bfp_unpolarized.png.json").read_text())
    assert meta["config"]["bfp"]["grid_size"] == 64


def test_bfp_empty_angle_list_gives_unpolarized_only(tmp_path):
    cfg = {"stack": {"preset": "antenna"},
           "bfp": {"grid_size": 32, "polarizer_deg": []}}
    code, out = run(tmp_path, "bfp", cfg)
    assert code == 0
    names = [p.name for p in out.iterdir() if p.suffix == ".png"]
    assert names == ["bfp_unpolarized.png"]


def test_bfp_pgm_format(tmp_path):
    cfg = {"stack": {"preset": "antenna"},
           "bfp": {"grid_size": 32, "polarizer_deg": [], "format": "pgm"}}
    code, out = run(tmp_path, "bfp", cfg)
    assert code == 0
    assert (out / "bfp_unpolarized.pgm").exists()
    img = load_measurement(str(out / "bfp_unpolarized.pgm"))
    assert img.n1 == pytest.approx(1.78)


# ---------------------------------------------------------------------------
# sweep

def test_sweep_writes_per_distance_sets_and_search(tmp_path, capsys):
    cfg = {"stack": {"preset": "antenna"},
           "sweep": {"distances_nm": [300.0, 500.0], "na": 1.65,
                     "theta_samples": 16, "phi_samples": 8,
                     "search": {"min_nm": 250.0, "max_nm": 350.0,
                                "points": 3}}}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 0
    for tag in ("d300", "d500"):
        for stem in ("pattern", "profile", "budget"):
            suffix = "json" if stem == "budget" else "csv"
            assert (out / f"{stem}_{tag}.{suffix}").exists()
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[1].startswith("distance_nm,")
    assert len(rows) == 4
    search = json.loads((out / "search.json").read_text())
    assert len(search["grid_nm"]) == 3
    assert search["best_collected_na"] == max(search["collected_na"])
    printed = json.loads(capsys.readouterr().out)
    assert printed["best_distance_nm"] in search["grid_nm"]


def test_sweep_single_distance_matches_pattern_command(tmp_path):
    sweep_cfg = {"stack": {"preset": "antenna"},
                 "sweep": {"distances_nm": [500.0], "na": 1.65,
                           "theta_samples": 16, "phi_samples": 8}}
    code, out1 = run(tmp_path, "sweep", sweep_cfg, "s")
    assert code == 0
    pat_cfg = {"stack": {"preset": "antenna", "mirror_separation_nm": 500.0},
               "pattern": {"na": 1.65, "theta_samples": 16,
                           "phi_samples": 8}}
    code, out2 = run(tmp_path, "pattern", pat_cfg, "p")
    assert code == 0
    b1 = json.loads((out1 / "budget_d500.json").read_text())["budget"]
    b2 = json.loads((out2 / "budget.json").read_text())["budget"]
    for key in ("collected_na", "substrate_beyond_na", "leaked_top",
                "absorbed"):
        assert b1[key] == pytest.approx(b2[key], rel=1e-12)


def test_sweep_rejects_premirrored_stack(tmp_path, capsys):
    cfg = {"stack": {"preset": "antenna", "mirror_separation_nm": 300.0},
           "sweep": {"distances_nm": [300.0]}}
    code, _ = run(tmp_path, "sweep", cfg)
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert err["where"] == "sweep"


# ---------------------------------------------------------------------------
# fit

def test_fit_end_to_end_recovers_weights(tmp_path, capsys):
    stack = antenna_stack()
    em = DipoleEmitter(1, 200.0, 637.0, (0.44, 0.21, 0.35))
    img = render_bfp(angular_pattern(stack, em, 16, 8), 96, 1.65)
    img_path = tmp_path / "measured.png"
    save_image(img, str(img_path))
    cfg = {"stack": {"preset": "antenna"},
           "fit": {"image": str(img_path)}}
    code, out = run(tmp_path, "fit", cfg)
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())["fit"]
    got = (fit["weights"]["axial"], fit["weights"]["x"], fit["weights"]["y"])
    assert got == pytest.approx((0.44, 0.21, 0.35), abs=1e-3)
    assert fit["residual_rms"] < 1e-3
    printed = json.loads(capsys.readouterr().out)
    assert printed["weights"]["axial"] == fit["weights"]["axial"]


def test_fit_missing_image_is_config_error(tmp_path, capsys):
    cfg = {"stack": {"preset": "antenna"},
           "fit": {"image": str(tmp_path / "nope.png")}}
    code, _ = run(tmp_path, "fit", cfg)
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert err["where"] == "fit/image"


# ---------------------------------------------------------------------------
# photon

def photon_cfg(**kw):
    base = {"rep_rate_hz": 1e6, "lifetime_ns": 5.0, "quantum_yield": 1.0,
            "detection_efficiency": 0.8, "duration_s": 0.01,
            "g2": {"bin_width_ns": 3.2, "span_ns": 2500.0},
            "trace_bin_ms": 1.0}
    base.update(kw)
    return {"photon": base, "seed": 11}


def test_photon_end_to_end_antibunched(tmp_path, capsys):
    code, out = run(tmp_path, "photon", photon_cfg())
    assert code == 0
    for name in ("stream.csv", "g2.csv", "trace.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["events"] > 6000
    assert summary["g2"]["center_ratio"] == 0.0
    assert summary["trace_bins"] == 10
    rows = (out / "stream.csv").read_text().splitlines()
    assert rows[1] == "time_s,detector"
    assert summary["events"] == len(rows) - 2


def test_photon_rerun_identical_and_seed_changes(tmp_path):
    cfg = photon_cfg()
    _, out1 = run(tmp_path, "photon", cfg, "a")
    _, out2 = run(tmp_path, "photon", cfg, "b")
    assert tree_bytes(out1) == tree_bytes(out2)
    code, out3 = run(tmp_path, "photon", cfg, "c", "--seed", "99")
    assert code == 0
    assert (out3 / "stream.csv").read_bytes() != (out1 / "stream.csv").read_bytes()
    assert json.loads((out3 / "summary.json").read_text())["seed"] == 99


def test_photon_multiexciton_raises_center(tmp_path):
    code, out = run(tmp_path, "photon", photon_cfg(p_biexciton=0.4))
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["g2"]["center_ratio"] > 0.5


# ---------------------------------------------------------------------------
# error paths and exit codes

def test_schema_violation_exits_2(tmp_path, capsys):
    cfg = {"pattern": {"theta_samples": 4}, "stack": UNIFORM_STACK}
    code, _ = run(tmp_path, "pattern", cfg)
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert err["where"] == "pattern/theta_samples"


def test_unknown_key_exits_2(tmp_path, capsys):
    code, _ = run(tmp_path, "pattern", {"bogus": 1})
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"


def test_unreadable_config_exits_2(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["pattern", "--config", str(tmp_path / "missing.json"),
                 "--out", str(out)])
    assert code == 2
    assert "cannot read config" in json.loads(capsys.readouterr().err)["message"]


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = main(["pattern", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"


def test_emitter_outside_host_exits_2(tmp_path, capsys):
    cfg = {"stack": UNIFORM_STACK, "emitter": {"z_offset_nm": 900.0},
           "pattern": {"theta_samples": 16, "phi_samples": 8}}
    code, _ = run(tmp_path, "pattern", cfg)
    assert code == 2
    assert json.loads(capsys.readouterr().err)["where"] == "emitter"


def test_negative_seed_exits_2(tmp_path, capsys):
    cfg = {"stack": UNIFORM_STACK,
           "pattern": {"theta_samples": 16, "phi_samples": 8}}
    code, _ = run(tmp_path, "pattern", cfg, "o", "--seed", "-4")
    assert code == 2
    assert json.loads(capsys.readouterr().err)["where"] == "seed"


def test_strict_escalates_truncation_to_3(tmp_path, capsys):
    cfg = {"stack": {"preset": "antenna", "mirror_separation_nm": 5.0},
           "pattern": {"u_max": 1.6, "theta_samples": 8, "phi_samples": 8}}
    code, _ = run(tmp_path, "pattern", cfg, "strict", "--strict")
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "accuracy"
    code, _ = run(tmp_path, "pattern", cfg, "loose")
    assert code == 0
