"""mfseg command line: synth | segment | estimate | eval | repro | spectrum."""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import yaml

from src.analysis.metrics import score_segmentation, spectrum_curve
from src.analysis.synth import preset_scene, synth_scene
from src.errors import ConfigError, MfsegError, ShapeMismatchError
from src.runner.pipeline import estimate_homogeneous, segment
from src.runner.repro import TABLES, run_table
from src.utils.config import SamplerConfig, load_config
from src.utils.imageio import read_image, read_mask, write_image, write_mask
from src.utils.log import setup_logging
from src.utils.report import build_manifest, parameter_report, print_summary, save_csv_table, save_excel_tables, save_json_report, to_json
from src.utils.visual import save_label_panel

logger = logging.getLogger(__name__)


def _sampler_flags(p: argparse.ArgumentParser, with_k: bool = True):
    if with_k:
        p.add_argument("--k", type=int, help="number of regions K")
    p.add_argument("--j1", type=int, help="finest analysed scale")
    p.add_argument("--j2", type=int, help="coarsest analysed scale")
    p.add_argument("--iters", type=int, help="total Gibbs iterations N_m")
    p.add_argument("--burnin", type=int, help="burn-in iterations N_b")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--q", type=float, help="upper bound Q of the granularity prior")
    p.add_argument("--v", type=int, help="inner iterations V of the granularity update")
    p.add_argument("--wavelet-order", type=int, help="Daubechies vanishing moments")
    p.add_argument("--chains", type=int, help="independent chains (PSRF for >= 2)")


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfseg", description="Joint multifractal segmentation and estimation of images.")
    parser.add_argument("--config", help="YAML file merged over config/config.yaml")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an MRW scene with its ground-truth mask")
    p.add_argument("--preset", default="k2-default", help="scene preset from config (synth.presets)")
    p.add_argument("--scene", help="YAML file describing a scene (same keys as a preset)")
    p.add_argument("--n", type=int, help="override the image side")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("segment", help="jointly segment an image and estimate region parameters")
    p.add_argument("image")
    _sampler_flags(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--truth", help="ground-truth mask, scored and drawn in the panel")
    p.add_argument("--baseline", action="store_true", help="also run the k-means baselines")
    p.add_argument("--probability", action="store_true", help="write the MAP label vote fraction as an image")
    p.add_argument("--panel", action="store_true", help="write a PNG label panel")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("estimate", help="homogeneous (single region) estimation")
    p.add_argument("image")
    _sampler_flags(p, with_k=False)
    p.add_argument("--out", help="output directory")
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("eval", help="score a predicted mask against the ground truth")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--k", type=int, help="class count (default: largest label present)")
    p.add_argument("--out", help="write the score record to this file")

    p = sub.add_parser("repro", help="Monte Carlo reproduction of a published table")
    p.add_argument("table", choices=TABLES)
    p.add_argument("--reps", type=int, default=20)
    _sampler_flags(p, with_k=False)
    p.add_argument("--excel", action="store_true")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("spectrum", help="tabulate the log-cumulant expansion of D(h)")
    p.add_argument("--c1", type=float, default=0.5)
    p.add_argument("--c2", type=float, required=True)
    p.add_argument("--c3", type=float)
    p.add_argument("--cubic", choices=("none", "printed", "corrected"))
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", help="output CSV")
    return parser


def _out_dir(args, cfg) -> Path:
    return Path(args.out or cfg["output"]["dir"])


def _conf(args, cfg, **extra) -> SamplerConfig:
    overrides = dict(
        k=getattr(args, "k", None),
        j1=args.j1, j2=args.j2,
        n_iter=args.iters, burn_in=args.burnin,
        seed=args.seed, beta_max=args.q, beta_iter=args.v,
        wavelet_order=args.wavelet_order, chains=args.chains,
    )
    overrides.update(extra)
    return SamplerConfig.from_config(cfg, **overrides)


def cmd_synth(args, cfg) -> int:
    if args.scene:
        with open(args.scene, "r", encoding="utf-8") as f:
            scene_cfg = yaml.safe_load(f) or {}
        cfg = {**cfg, "synth": {**cfg.get("synth", {}), "presets": {"custom": scene_cfg}}}
        name = "custom"
    else:
        name = args.preset
    if args.n:
        presets = dict(cfg["synth"]["presets"])
        presets[name] = {**presets.get(name, {}), "n": args.n}
        cfg = {**cfg, "synth": {**cfg["synth"], "presets": presets}}
    scene = preset_scene(cfg, name, seed=args.seed)
    out = _out_dir(args, cfg)
    start = time.perf_counter()
    image, mask = synth_scene(scene)
    elapsed = time.perf_counter() - start
    image_path = write_image(out / f"{name}.mfim", image)
    mask_path = write_mask(out / f"{name}_mask.pgm", mask + 1)
    manifest = build_manifest(
        "synth", {"scene": name, "n": scene.n, "c1": scene.c1, "c2": scene.c2_values, "j1": scene.j1, "j2": scene.j2},
        scene.seed, {"image": image_path, "mask": mask_path}, {"synthesis": elapsed},
        {"k": scene.k, "class_pixels": np.bincount(mask.ravel(), minlength=scene.k).tolist()},
    )
    save_json_report(manifest, out / f"{name}_manifest.json")
    print(f"🖼️  Image saved: {image_path}")
    print(f"🏷️  Mask saved: {mask_path}")
    return 0


def cmd_segment(args, cfg) -> int:
    conf = _conf(args, cfg)
    image = read_image(args.image)
    out = _out_dir(args, cfg)
    stem = Path(args.image).stem
    truth = None
    if args.truth:
        truth = read_mask(args.truth)
        if truth.shape != image.shape:
            raise ShapeMismatchError(f"ground truth is {truth.shape}, image is {image.shape}")
    result = segment(image, conf, progress=args.progress, baselines=args.baseline, dump_path=out / f"{stem}_state.json")

    paths = {"input": args.image, "labels": write_mask(out / f"{stem}_labels.pgm", result.labels + 1)}
    psrf = result.diag.psrf if result.diag else None
    report = parameter_report(result.estimate, beta=result.beta, psrf=psrf)
    if truth is not None:
        report["score"] = score_segmentation(result.labels, truth - 1, conf.k).to_record()
    for name, labels in result.baselines.items():
        paths[name] = write_mask(out / f"{stem}_{name}.pgm", labels + 1)
        if truth is not None:
            report.setdefault("baselines", {})[name] = score_segmentation(labels, truth - 1, conf.k).to_record()
    if args.probability:
        paths["probability"] = write_image(out / f"{stem}_probability.mfim", result.probability)
    if args.panel:
        panels = ([("Truth", truth)] if truth is not None else []) + [("Gibbs", result.labels + 1)]
        panels += [(name, labels + 1) for name, labels in result.baselines.items()]
        paths["panel"] = save_label_panel(out / f"{stem}_panel.png", image, panels)
    paths["report"] = save_json_report(report, out / f"{stem}_params.json")

    manifest = build_manifest("segment", conf.to_dict(), conf.seed, paths, result.timings, report, result.states[0].beta_trace)
    save_json_report(manifest, out / f"{stem}_manifest.json")
    lines = {f"class {r['class']} c2": f"{r['c2']:.4f} ± {r['theta1_std']:.4f}" for r in report["classes"]}
    if "score" in report:
        lines["error %"] = f"{report['score']['error_percent']:.2f}"
    if psrf:
        lines["max PSRF"] = f"{max(psrf.values()):.4f}"
    print_summary("Segmentation", lines)
    return 0


def cmd_estimate(args, cfg) -> int:
    conf = _conf(args, cfg, k=1)
    image = read_image(args.image)
    out = _out_dir(args, cfg)
    stem = Path(args.image).stem
    result = estimate_homogeneous(image, conf, progress=args.progress, dump_path=out / f"{stem}_state.json")
    reg = result.regression
    report = parameter_report(
        result.estimate,
        psrf=result.diag.psrf if result.diag else None,
        regression={"c2": reg.c2, "theta1": reg.theta1, "intercept": reg.intercept, "r2": reg.r2, "degenerate": reg.degenerate},
    )
    path = save_json_report(report, out / f"{stem}_estimate.json")
    manifest = build_manifest("estimate", conf.to_dict(), conf.seed, {"input": args.image, "report": path}, result.timings, report,
                              result.states[0].beta_trace)
    save_json_report(manifest, out / f"{stem}_manifest.json")
    rec = report["classes"][0]
    print_summary("Homogeneous estimate", {
        "c2 (Gibbs)": f"{rec['c2']:.4f} ± {rec['theta1_std']:.4f}",
        "c2 (regression)": f"{reg.c2:.4f}" + (" (degenerate)" if reg.degenerate else ""),
    })
    return 0


def cmd_eval(args, cfg) -> int:
    pred = read_mask(args.pred)
    truth = read_mask(args.truth)
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    k = args.k or int(max(pred.max(), truth.max()))
    score = score_segmentation(pred - 1, truth - 1, k, int(cfg.get("metrics", {}).get("maxPermutationK", 8)))
    record = score.to_record()
    if args.out:
        save_json_report(record, args.out)
    sys.stdout.write(to_json(record))
    return 0


def cmd_repro(args, cfg) -> int:
    conf = _conf(args, cfg)
    result = run_table(args.table, cfg, conf, args.reps, n_iter=args.iters, burn_in=args.burnin, chains=args.chains)
    out = _out_dir(args, cfg)
    with pd.option_context("display.max_columns", None, "display.width", 200, "display.precision", 4):
        print(result.table.to_string(index=False))
    save_csv_table(result.table, out / f"repro_{args.table}.csv")
    tables = {args.table: result.table}
    if result.traces is not None:
        save_csv_table(result.traces, out / f"repro_{args.table}_traces.csv")
        tables["traces"] = result.traces
    if result.raw:
        save_json_report({"realizations": result.raw}, out / f"repro_{args.table}_raw.json")
    if args.excel or cfg.get("output", {}).get("excel"):
        save_excel_tables(tables, out / f"repro_{args.table}.xlsx")
    return 0


def cmd_spectrum(args, cfg) -> int:
    form = args.cubic or cfg.get("metrics", {}).get("cubicForm", "none")
    h, d = spectrum_curve(args.c1, args.c2, args.c3, form=form, n_points=args.points)
    table = pd.DataFrame({"h": h, "D": d})
    if args.out:
        save_csv_table(table, args.out)
    else:
        sys.stdout.write(table.to_csv(index=False, float_format="%.6g"))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "segment": cmd_segment,
    "estimate": cmd_estimate,
    "eval": cmd_eval,
    "repro": cmd_repro,
    "spectrum": cmd_spectrum,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = get_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        setup_logging(args.log_level, default=cfg.get("logging", {}).get("level", "INFO"))
        return COMMANDS[args.command](args, cfg)
    except MfsegError as err:
        print(f"❌ {type(err).__name__}: {err}", file=sys.stderr)
        dump = getattr(err, "dump_path", None)
        if dump:
            print(f"   state dump: {dump}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"❌ {err}", file=sys.stderr)
        return ConfigError.exit_code
