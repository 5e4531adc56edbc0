"""Command-line front end: bind configurations to studies and file outputs.

Every run writes its outputs plus a ``manifest.json`` capturing the
resolved configuration, the seed and the output list; re-running with the
manifest as the config reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import channel as chan
from . import experiments as xp
from .config import (
    ConfigError,
    build_scenario,
    build_tag_from_config,
    load_config,
    map_grid_from_config,
    snr_axis,
)
from .polarization import (
    Orientation,
    agreement_map,
    degree_grid,
)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0
    version: str = __version__


def _scenario_fingerprint(cfg: dict) -> str:
    keys = (
        "frequency_hz", "snr_tx_db", "tx_power_w", "source_position", "source_orientation_deg",
        "reader_position", "reader_orientation_deg", "tag_position", "tag_orientation_deg",
        "n_scatterers", "scatterer_length_m", "scatterer_gain", "ground_plane",
        "tag_scatter_bounce", "backscatter_gain", "ber_target", "seed",
    )
    blob = json.dumps({k: cfg.get(k) for k in keys}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write_json(path: str, payload: dict) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _finish(manifest: RunManifest, outdir: str, started: float) -> None:
    manifest.duration_s = time.perf_counter() - started
    _write_json(os.path.join(outdir, "manifest.json"), asdict(manifest))
    for path in manifest.outputs:
        if not (os.path.exists(path) and os.path.getsize(path) > 0):
            raise RuntimeError(f"output {path} missing or empty")


def _load(args) -> dict:
    overrides = {"seed": args.seed} if args.seed is not None else None
    return load_config(args.config, preset_name=args.preset, overrides=overrides)


def cmd_optimum(args) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)

    step = float(cfg["optimum"]["reader_step_deg"])
    tag_step = float(cfg["optimum"]["tag_step_deg"])
    reader_grid = degree_grid(0.0, 90.0, step)
    dots, analytic, searched = agreement_map(
        Orientation(0.0, 0.0), reader_grid, reader_grid, tag_step_deg=tag_step, return_details=True
    )
    for i, r_theta in enumerate(np.rad2deg(reader_grid)):
        for j, r_phi in enumerate(np.rad2deg(reader_grid)):
            a_t, a_p = analytic[i, j].to_degrees()
            s_t, s_p = searched[i, j].to_degrees()
            print(
                f"reader theta={r_theta:5.1f} phi={r_phi:5.1f} deg | "
                f"closed-form tag ({a_t:6.2f}, {a_p:6.2f}) | "
                f"search tag ({s_t:6.2f}, {s_p:6.2f}) | dot={dots[i, j]:.6f}"
            )

    agreement_path = os.path.join(args.out, "agreement.csv")
    xp.write_matrix_csv(agreement_path, dots)
    manifest = RunManifest("optimum", cfg, cfg["seed"], [agreement_path])
    _finish(manifest, args.out, started)
    print(f"wrote {agreement_path} (min dot = {dots.min():.6f})")
    return 0


def cmd_map(args) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)

    scenario = build_scenario(cfg)
    tag = build_tag_from_config(cfg)
    grid = map_grid_from_config(cfg)
    mcfg = cfg["map"]
    bermap = xp.ber_map(
        scenario,
        tag,
        cfg["detector"],
        grid,
        float(cfg["snr_tx_db"]),
        seed=cfg["seed"],
        n_bits=int(mcfg["n_bits"]),
        n_train=int(mcfg["n_train"]),
        lse_analytic=bool(mcfg["lse_analytic"]),
        threads=args.threads,
    )

    ber_path = os.path.join(args.out, "ber.csv")
    carpet_path = os.path.join(args.out, "carpet.csv")
    meta_path = os.path.join(args.out, "meta.json")
    xp.write_matrix_csv(ber_path, bermap.ber)
    xp.write_carpet_csv(carpet_path, bermap)
    _write_json(
        meta_path,
        {
            "x0": grid.x_range[0],
            "y0": grid.y_range[0],
            "step_m": grid.step,
            "z_m": grid.z,
            "nx": len(grid.xs),
            "ny": len(grid.ys),
            "snr_tx_db": cfg["snr_tx_db"],
            "detector": cfg["detector"],
            "tag_kind": cfg["tag_kind"],
            "n_patterns": len(tag.patterns),
            "seed": cfg["seed"],
            "scenario": _scenario_fingerprint(cfg),
            "version": __version__,
        },
    )
    manifest = RunManifest("map", cfg, cfg["seed"], [ber_path, carpet_path, meta_path])
    _finish(manifest, args.out, started)
    print(f"wrote {ber_path} ({bermap.ber.shape[0]}x{bermap.ber.shape[1]} cells, "
          f"min ber={bermap.ber.min():.3g})")
    return 0


def cmd_outage(args) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)

    scenario = build_scenario(cfg)
    ocfg = cfg["outage"]
    axis_values = snr_axis(ocfg["snr_db"])
    tag_names = ocfg["tags"] or [None]
    detectors = ocfg["detectors"] or [cfg["detector"]]

    outputs = []
    for tag_name in tag_names:
        tag = build_tag_from_config(cfg, tag_name)
        label = tag_name or (cfg["tag_kind"] if cfg["tag_kind"] != "nr" else f"nr-{cfg['nr_preset']}")
        for detector in detectors:
            curve = xp.outage_curve(
                scenario,
                tag,
                detector,
                axis_values,
                ber_target=float(cfg["ber_target"]),
                step=float(ocfg["step_m"]),
                axis=ocfg["axis"],
                seed=cfg["seed"],
                n_bits=int(ocfg["n_bits"]),
                n_train=int(ocfg["n_train"]),
                lse_analytic=bool(ocfg["lse_analytic"]),
                threads=args.threads,
            )
            path = os.path.join(args.out, f"outage_{label}_{detector}.csv")
            xp.write_curve_csv(path, curve.snr_db, curve.outage, header=(f"snr_{curve.axis}_db", "outage"))
            outputs.append(path)
            print(f"wrote {path} (outage {curve.outage[0]:.3f} -> {curve.outage[-1]:.3f})")

    manifest = RunManifest("outage", cfg, cfg["seed"], outputs)
    _finish(manifest, args.out, started)
    return 0


def cmd_pcs(args) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)

    pcfg = cfg["pcs"]
    axis_values = snr_axis(pcfg["snr_captured_db"], key="pcs.snr_captured_db")
    pairs = list(pcfg["pairs"])
    synthetic = pcfg.get("synthetic")
    if synthetic:
        generator = xp.correlated_pcs_channels(
            cfg["seed"],
            float(synthetic.get("rho", 0.5)),
            n_states=int(synthetic.get("n_states", 4)),
            sigma=float(synthetic.get("sigma", 1.0)),
        )
        curves = xp.pcs_sweep(
            generator,
            pairs,
            axis_values,
            int(pcfg["n_bits"]),
            seed=cfg["seed"],
            n_train=int(pcfg["n_train"]),
            n_realizations=int(synthetic.get("realizations", 100)),
        )
    else:
        if not pcfg.get("channel_file"):
            raise ConfigError("pcs.channel_file: required unless pcs.synthetic is set")
        channels = xp.load_measured_channels(pcfg["channel_file"])
        curves = xp.pcs_sweep(
            channels, pairs, axis_values, int(pcfg["n_bits"]), seed=cfg["seed"], n_train=int(pcfg["n_train"])
        )

    outputs = []
    for name, ber in curves.items():
        path = os.path.join(args.out, f"pcs_{name.replace(':', '-')}.csv")
        xp.write_curve_csv(path, axis_values, ber, header=("snr_captured_db", "ber"))
        outputs.append(path)
        print(f"wrote {path} (ber {ber[0]:.3g} -> {ber[-1]:.3g})")

    manifest = RunManifest("pcs", cfg, cfg["seed"], outputs)
    _finish(manifest, args.out, started)
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    scenario = build_scenario(cfg)
    problems = chan.check_scatterer_constraints(scenario)
    print(f"config ok: {cfg['n_scatterers']} scatterers, ground_plane={cfg['ground_plane']}, "
          f"tag_kind={cfg['tag_kind']}, detector={cfg['detector']}")
    if problems:
        for p in problems:
            print(f"constraint violation: {p}", file=sys.stderr)
        return 1
    print("scatterer constraints ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarscat",
        description="Link-level simulator for polarization-reconfigurable ambient backscatter tags",
    )
    parser.add_argument("--version", action="version", version=f"polarscat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "optimum": (cmd_optimum, "closed-form vs exhaustive tag orientation agreement study"),
        "map": (cmd_map, "spatial error-rate map with best-orientation overlay"),
        "outage": (cmd_outage, "coverage outage probability versus SNR"),
        "pcs": (cmd_pcs, "polarization-pair error-rate sweep over measured or synthetic channels"),
        "validate": (cmd_validate, "lint the configuration and check scatterer placement"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="YAML configuration file (or a manifest.json)")
        p.add_argument("--preset", default=None, help="named scenario preset, e.g. scat-4pr")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap for parallel sweeps")
        p.add_argument("--out", default=".", help="output directory")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config and args.config.endswith(".json"):
        # allow re-running from a manifest: unwrap its config snapshot
        with open(args.config) as fh:
            payload = json.load(fh)
        if "config" in payload:
            import tempfile

            import yaml

            with tempfile.NamedTemporaryFile("w", suffix=".yml", delete=False) as tmp:
                yaml.safe_dump(payload["config"], tmp)
                args.config = tmp.name
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
