"""Command-line front end: config ingestion, figure-style artifact emission.

One subcommand per workflow (pattern, bfp, sweep, fit, photon). Every run
is deterministic given (config, seed): no timestamps, sorted JSON keys,
fixed float formatting. Each output embeds the fully resolved config so an
artifact can be traced back to its inputs.

Exit codes: 0 success, 2 config/schema error, 3 accuracy warning under
--strict.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings
from importlib import resources

import jsonschema
import numpy as np

from .bfp import load_measurement, phi_integrate_image, render_bfp, save_image
from .errors import AccuracyWarning, OutOfDomainError
from .fitting import FitConfig, full_fit
from .photostats import (EmitterPhotophysics, FlickerState, g2_histogram,
                         simulate_source, time_trace)
from .presets import GOLD, antenna_stack
from .radiation import (DipoleEmitter, angular_pattern, mirror_distance_sweep,
                        phi_integrated_profile, radiation_budget)
from .stack import Layer, LayerStack, OpticalMaterial

_FLOAT_FMT = "%.12g"


class ConfigError(Exception):
    """Invalid run configuration; carries a JSON-pointer-ish location."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(message)
        self.where = where


def _schema() -> dict:
    text = resources.files("mdantenna").joinpath("config_schema.json") \
        .read_text()
    return json.loads(text)


_DEFAULTS = {
    "stack": {"preset": "antenna"},
    "emitter": {"host_layer": 1, "z_offset_nm": 200.0,
                "wavelength_nm": 637.0, "weights": [0.31, 0.345, 0.345]},
    "seed": 0,
    "pattern": {"theta_samples": 128, "phi_samples": 64,
                "na": None, "u_max": None},
    "bfp": {"grid_size": 256, "na_limit": None,
            "polarizer_deg": [0.0, 30.0, 60.0, 90.0, 120.0, 150.0],
            "format": "png"},
    "sweep": {"distances_nm": None, "mirror": None, "na": None,
              "theta_samples": 128, "phi_samples": 64,
              "images": False, "grid_size": 128, "search": None},
    "fit": {"image": None, "metadata": None,
            "mask_max_theta_deg": None, "radial_bins": 64},
    "photon": {"rep_rate_hz": 5e6, "lifetime_ns": 30.0,
               "quantum_yield": 1.0, "p_biexciton": 0.0,
               "biexciton_lifetime_ns": None, "detection_efficiency": 1.0,
               "flicker_states": [
                   {"relative_brightness": 1.0, "mean_dwell_s": 1.0}],
               "duration_s": 0.02,
               "g2": {"bin_width_ns": 2.0, "span_ns": 1000.0},
               "trace_bin_ms": 10.0},
}


def load_config(path: str) -> dict:
    """Read, schema-validate and default-fill a run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path)
        raise ConfigError(first.message, where)
    return _fill_defaults(raw)


def _fill_defaults(raw: dict) -> dict:
    cfg = copy.deepcopy(_DEFAULTS)
    for section, value in raw.items():
        if isinstance(value, dict):
            base = cfg.get(section)
            if isinstance(base, dict):
                for key, sub in value.items():
                    if isinstance(sub, dict) and isinstance(base.get(key), dict):
                        base[key].update(sub)
                    else:
                        base[key] = sub
            else:
                cfg[section] = value
        else:
            cfg[section] = value
    return cfg


def build_stack(cfg: dict) -> LayerStack:
    sc = cfg["stack"]
    if sc.get("layers"):
        wl = sc.get("wavelength_nm")
        if wl is not None and wl != cfg["emitter"]["wavelength_nm"]:
            raise ConfigError(
                f"stack wavelength {wl} differs from emitter wavelength "
                f"{cfg['emitter']['wavelength_nm']}", "stack/wavelength_nm")
        layers = []
        for i, spec in enumerate(sc["layers"]):
            thick = spec["thickness_nm"]
            thickness = None if thick == "semi-infinite" else float(thick)
            try:
                mat = OpticalMaterial(spec["name"], spec["n"],
                                      spec.get("kappa", 0.0))
                layers.append(Layer(mat, thickness))
            except ValueError as exc:
                raise ConfigError(str(exc), f"stack/layers/{i}") from exc
        try:
            return LayerStack(layers)
        except ValueError as exc:
            raise ConfigError(str(exc), "stack/layers") from exc
    mirror = GOLD
    if sc.get("mirror"):
        m = sc["mirror"]
        mirror = OpticalMaterial(m["name"], m["n"], m.get("kappa", 0.0))
    try:
        return antenna_stack(
            mirror_separation_nm=sc.get("mirror_separation_nm"),
            split_film=sc.get("split_film", False),
            mirror=mirror)
    except ValueError as exc:
        raise ConfigError(str(exc), "stack") from exc


def build_emitter(cfg: dict, stack: LayerStack) -> DipoleEmitter:
    ec = cfg["emitter"]
    weights = np.asarray(ec["weights"], dtype=float)
    total = weights.sum()
    if total <= 0:
        raise ConfigError("emitter weights must not all vanish",
                          "emitter/weights")
    weights = weights / total
    cfg["emitter"]["weights"] = [float(w) for w in weights]
    try:
        emitter = DipoleEmitter(ec["host_layer"], ec["z_offset_nm"],
                                ec["wavelength_nm"], tuple(weights))
        from .radiation import _check_geometry
        _check_geometry(stack, emitter)
    except ValueError as exc:
        raise ConfigError(str(exc), "emitter") from exc
    return emitter


# ---------------------------------------------------------------------------
# deterministic writers

def _dump_json(payload: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_header(cfg: dict) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True)


def _write_pattern_csv(pattern, cfg: dict, path: str) -> None:
    dens = pattern.power_density  # (theta, phi, comp, pol, half)
    comps = ("z", "x", "y")
    pols = ("s", "p")
    halves = ("down", "up")
    with open(path, "w") as fh:
        fh.write(_config_header(cfg) + "\n")
        fh.write("theta_rad,phi_rad,component,pol,half_space,power_density\n")
        for k, hs in enumerate(halves):
            for c, comp in enumerate(comps):
                for p, pol in enumerate(pols):
                    block = dens[:, :, c, p, k]
                    if not block.any():
                        continue
                    for i, th in enumerate(pattern.theta):
                        row = block[i]
                        for j, ph in enumerate(pattern.phi):
                            fh.write(f"{th:.12g},{ph:.12g},{comp},{pol},"
                                     f"{hs},{row[j]:.12g}\n")


def _write_profile_csv(profile, cfg: dict, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(_config_header(cfg) + "\n")
        fh.write("theta_rad,power_per_rad\n")
        for th, p in zip(profile.theta, profile.power):
            fh.write(f"{th:.12g},{p:.12g}\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_pattern(cfg: dict, out: str, threads: int) -> int:
    stack = build_stack(cfg)
    emitter = build_emitter(cfg, stack)
    pc = cfg["pattern"]
    na = pc["na"] if pc["na"] is not None else stack.layers[0].material.n
    budget = radiation_budget(stack, emitter, na, u_max=pc["u_max"])
    pattern = angular_pattern(stack, emitter, pc["theta_samples"],
                              pc["phi_samples"])
    _write_pattern_csv(pattern, cfg, os.path.join(out, "pattern.csv"))
    profile = phi_integrated_profile(pattern, "down")
    _write_profile_csv(profile, cfg, os.path.join(out, "profile.csv"))
    payload = {"budget": budget.as_dict(), "config": cfg}
    _dump_json(payload, os.path.join(out, "budget.json"))
    print(json.dumps(payload["budget"], indent=2, sort_keys=True))
    return 0


def cmd_bfp(cfg: dict, out: str, threads: int) -> int:
    stack = build_stack(cfg)
    emitter = build_emitter(cfg, stack)
    bc = cfg["bfp"]
    pattern = angular_pattern(stack, emitter, 8, 8)
    ext = bc["format"]
    meta = {"config": cfg}
    written = []

    def emit(angle, name):
        image = render_bfp(pattern, grid_size=bc["grid_size"],
                           na_limit=bc["na_limit"], polarizer_deg=angle)
        path = os.path.join(out, f"{name}.{ext}")
        save_image(image, path, extra_metadata=meta)
        written.append(path)

    emit(None, "bfp_unpolarized")
    for angle in bc["polarizer_deg"]:
        emit(float(angle), f"bfp_pol{angle:g}")
    print(json.dumps({"images": [os.path.basename(p) for p in written]},
                     indent=2, sort_keys=True))
    return 0


def cmd_sweep(cfg: dict, out: str, threads: int) -> int:
    stack = build_stack(cfg)
    emitter = build_emitter(cfg, stack)
    sc = cfg["sweep"]
    if stack.layers[-1].material.kappa > 0 or cfg["stack"].get(
            "mirror_separation_nm") is not None:
        raise ConfigError("sweep expects the mirrorless template stack; the "
                          "mirror is placed per distance", "sweep")
    mirror = GOLD
    if sc.get("mirror"):
        m = sc["mirror"]
        mirror = OpticalMaterial(m["name"], m["n"], m.get("kappa", 0.0))
    na = sc["na"] if sc["na"] is not None else stack.layers[0].material.n
    distances = sc["distances_nm"]
    if distances is None and sc["search"] is None:
        raise ConfigError("sweep needs distances_nm and/or search", "sweep")

    summary_rows = []
    if distances:
        points = mirror_distance_sweep(
            stack, emitter, [float(d) for d in distances], na, mirror,
            theta_samples=sc["theta_samples"], phi_samples=sc["phi_samples"],
            threads=threads)
        for pt in points:
            tag = f"d{pt.distance_nm:g}"
            _write_pattern_csv(pt.pattern, cfg,
                               os.path.join(out, f"pattern_{tag}.csv"))
            profile = phi_integrated_profile(pt.pattern, "down")
            _write_profile_csv(profile, cfg,
                               os.path.join(out, f"profile_{tag}.csv"))
            _dump_json({"budget": pt.budget.as_dict(), "config": cfg,
                        "distance_nm": pt.distance_nm},
                       os.path.join(out, f"budget_{tag}.json"))
            if sc["images"]:
                image = render_bfp(pt.pattern, grid_size=sc["grid_size"])
                save_image(image, os.path.join(out, f"bfp_{tag}.png"),
                           extra_metadata={"config": cfg,
                                           "distance_nm": pt.distance_nm})
            summary_rows.append((pt.distance_nm, pt.budget))
        with open(os.path.join(out, "sweep.csv"), "w") as fh:
            fh.write(_config_header(cfg) + "\n")
            fh.write("distance_nm,collected_na,substrate_beyond_na,"
                     "leaked_top,absorbed\n")
            for d, b in summary_rows:
                fh.write(f"{d:.12g},{b.collected_na:.12g},"
                         f"{b.substrate_beyond_na:.12g},{b.leaked_top:.12g},"
                         f"{b.absorbed:.12g}\n")

    if sc["search"]:
        srch = sc["search"]
        grid = np.linspace(srch["min_nm"], srch["max_nm"], srch["points"])
        pts = mirror_distance_sweep(stack, emitter, grid, na, mirror,
                                    theta_samples=64, phi_samples=8,
                                    threads=threads)
        best = max(pts, key=lambda p: p.budget.collected_na)
        payload = {
            "config": cfg,
            "grid_nm": [float(d) for d in grid],
            "collected_na": [pt.budget.collected_na for pt in pts],
            "best_distance_nm": best.distance_nm,
            "best_collected_na": best.budget.collected_na,
        }
        _dump_json(payload, os.path.join(out, "search.json"))
        print(json.dumps({"best_distance_nm": best.distance_nm,
                          "best_collected_na": best.budget.collected_na},
                         indent=2, sort_keys=True))
    return 0


def cmd_fit(cfg: dict, out: str, threads: int) -> int:
    stack = build_stack(cfg)
    fc = cfg["fit"]
    if not fc["image"]:
        raise ConfigError("fit needs an input image path", "fit/image")
    try:
        image = load_measurement(fc["image"], fc["metadata"])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load measurement: {exc}",
                          "fit/image") from exc
    fit_config = FitConfig(
        host_layer=cfg["emitter"]["host_layer"],
        z_offset_nm=cfg["emitter"]["z_offset_nm"],
        wavelength_nm=cfg["emitter"]["wavelength_nm"],
        mask_max_theta_deg=fc["mask_max_theta_deg"],
        radial_bins=fc["radial_bins"])
    result = full_fit(image, stack, fit_config)
    payload = {"fit": result.as_dict(), "config": cfg}
    _dump_json(payload, os.path.join(out, "fit.json"))
    print(json.dumps(payload["fit"], indent=2, sort_keys=True))
    return 0


def cmd_photon(cfg: dict, out: str, threads: int) -> int:
    pc = cfg["photon"]
    try:
        physics = EmitterPhotophysics(
            rep_rate_hz=pc["rep_rate_hz"],
            lifetime_ns=pc["lifetime_ns"],
            quantum_yield=pc["quantum_yield"],
            p_biexciton=pc["p_biexciton"],
            biexciton_lifetime_ns=pc["biexciton_lifetime_ns"],
            flicker_states=tuple(
                FlickerState(s["relative_brightness"], s["mean_dwell_s"])
                for s in pc["flicker_states"]),
            detection_efficiency=pc["detection_efficiency"])
    except (OutOfDomainError, ValueError) as exc:
        raise ConfigError(str(exc), "photon") from exc
    stream = simulate_source(physics, pc["duration_s"], seed=cfg["seed"])

    with open(os.path.join(out, "stream.csv"), "w") as fh:
        fh.write(_config_header(cfg) + "\n")
        fh.write("time_s,detector\n")
        for t, ch in zip(stream.times, stream.channels):
            fh.write(f"{t:.12e},{ch:d}\n")

    summary = {"config": cfg, "events": int(len(stream.times)),
               "duration_s": stream.duration_s, "seed": cfg["seed"]}

    g2c = pc["g2"]
    try:
        hist = g2_histogram(stream, g2c["bin_width_ns"], g2c["span_ns"])
    except ValueError:
        hist = None
        summary["g2"] = None
    if hist is not None:
        with open(os.path.join(out, "g2.csv"), "w") as fh:
            fh.write(_config_header(cfg) + "\n")
            fh.write("tau_ns,counts\n")
            for tau, n in zip(hist.tau_ns, hist.counts):
                fh.write(f"{tau:.12g},{n:d}\n")
        summary["g2"] = {"center_ratio": hist.center_ratio,
                         "side_level": hist.side_level,
                         "bin_width_ns": hist.bin_width_ns,
                         "pulse_period_ns": hist.pulse_period_ns}

    try:
        trace = time_trace(stream, pc["trace_bin_ms"])
    except ValueError:
        trace = None
        summary["trace_bins"] = 0
    if trace is not None:
        with open(os.path.join(out, "trace.csv"), "w") as fh:
            fh.write(_config_header(cfg) + "\n")
            fh.write("t_ms,counts\n")
            for t0, n in zip(trace.t_ms, trace.counts):
                fh.write(f"{t0:.12g},{n:d}\n")
        summary["trace_bins"] = int(len(trace.counts))

    _dump_json(summary, os.path.join(out, "summary.json"))
    print(json.dumps({k: v for k, v in summary.items() if k != "config"},
                     indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "pattern": cmd_pattern,
    "bfp": cmd_bfp,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "photon": cmd_photon,
}


def _error_json(kind: str, message: str, where: str = "") -> str:
    payload = {"error": kind, "message": message}
    if where:
        payload["where"] = where
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mdantenna",
        description="Planar metallo-dielectric antenna simulations")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True,
                        help="JSON run configuration")
    parser.add_argument("--out", default=".",
                        help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for sweeps")
    parser.add_argument("--strict", action="store_true",
                        help="escalate accuracy warnings to exit code 3")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be non-negative", "seed")
            cfg["seed"] = args.seed
        os.makedirs(args.out, exist_ok=True)
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", AccuracyWarning)
            return _COMMANDS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(_error_json("config", str(exc), exc.where), file=sys.stderr)
        return 2
    except AccuracyWarning as exc:
        print(_error_json("accuracy", str(exc)), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
