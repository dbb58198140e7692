"""Batch command-line front end.

    frg guide gen       --input img.png --radius 1 --out g.frgr
    frg segment coarse  --input img.png --out-dir seg/
    frg filter          --pred pred.json --guide g.frgr --out kept.json --report d.csv
    frg eval            --gt gt.png --pred pred.png --report r.csv
    frg dataset crop    --image img.png --ann a.json --out-dir patches/
    frg dataset weaken  --ann a.json --keep 0.3 --seed 7 --out weak.json
    frg kernels check-grad --seed 0 --report grads.csv

Values may come from ``--config run.ini`` (sections named after modules, see
``CONFIG_KEYS``); flags always win.  Exit codes: 0 ok, 1 validation, 2 I/O.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .coarse import CoarseSegParams, coarse_segment
from .dataset import CropConfig, WeakenConfig, crop_patches, weaken_annotations
from .formats import (
    FormatError,
    load_annotations,
    load_guide,
    load_image,
    load_label_map,
    save_annotations,
    save_guide,
    save_label_png,
    save_rgb_png,
)
from .fourier import GuideMask, SpectralFilterSpec, fuse_with_gt, generate_soft_guide, harden
from .guide_filter import filter_instances, write_decisions_csv
from .kernels import (
    EmbeddingSet,
    bce_grad,
    bce_loss,
    check_gradient,
    info_nce_grad,
    info_nce_loss,
)
from .metrics import aggregate, evaluate, pq_match

log = logging.getLogger("frg")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

# dest -> (config section, key, type, built-in default)
CONFIG_KEYS = {
    "radius": ("fourier-guide", "radius", float, 1.0),
    "harden_threshold": ("fourier-guide", "harden_threshold", float, 0.5),
    "binarize_threshold": ("coarse-instances", "binarize_threshold", float, 0.5),
    "opening_kernel": ("coarse-instances", "opening_kernel", int, 3),
    "opening_iterations": ("coarse-instances", "opening_iterations", int, 1),
    "connectivity": ("coarse-instances", "connectivity", int, 8),
    "min_area": ("coarse-instances", "min_area", int, 20),
    "threshold": ("guide-filter", "threshold", float, 0.5),
    "patch_size": ("dataset-io", "patch_size", int, 256),
    "stride": ("dataset-io", "stride", int, None),
    "min_fraction": ("dataset-io", "min_instance_fraction", float, 0.10),
    "crop_min_area": ("dataset-io", "min_area", int, 20),
    "keep": ("dataset-io", "keep_fraction", float, None),
    "trials": ("neural-kernels", "trials", int, 20),
    "temperature": ("neural-kernels", "temperature", float, 0.1),
    "step": ("neural-kernels", "step", float, 1e-4),
    "tol": ("neural-kernels", "tol", float, 1e-4),
    "seed": ("cli", "seed", int, None),
    "jobs": ("cli", "jobs", int, 1),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _configure_logging():
    level = os.environ.get("FRG_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s")


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    values = {}
    for dest, (section, key, typ, _) in CONFIG_KEYS.items():
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                values[dest] = typ(raw)
            except ValueError:
                raise UsageError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}")
    return values


def _resolve(args, config: dict):
    for dest, (_, _, _, default) in CONFIG_KEYS.items():
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, config.get(dest, default))


def _params(args) -> dict:
    skip = {"func", "config", "command", "action"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_manifest(out_path, args):
    manifest = {
        "command": f"{args.command} {args.action}".strip(),
        "version": __version__,
        "parameters": _params(args),
        "seed": getattr(args, "seed", None),
    }
    Path(f"{out_path}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _require_seed(args):
    if args.seed is None:
        raise UsageError("seed: this command is randomized and requires --seed")


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


# -- commands -----------------------------------------------------------------


def cmd_guide_gen(args):
    f = SpectralFilterSpec(args.radius)
    if args.hard and not 0 < args.harden_threshold < 1:
        raise ValueError("harden_threshold must lie in (0, 1)")
    inputs = args.input
    if args.gt and len(args.gt) != len(inputs):
        raise ValueError("gt: need one ground-truth file per input")
    if len(inputs) > 1 or args.out is None:
        if args.out_dir is None:
            raise UsageError("out-dir: required for multiple inputs (or give --out)")
        outs = [Path(args.out_dir) / f"{Path(p).stem}.{args.format}" for p in inputs]
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    else:
        outs = [Path(args.out)]

    def run(k):
        g = generate_soft_guide(load_image(inputs[k]), f)
        if args.gt:
            g = fuse_with_gt(g, load_label_map(args.gt[k]) > 0)
        if args.hard:
            g = harden(g, args.harden_threshold)
        save_guide(outs[k], g.values)
        _write_manifest(outs[k], args)
        return outs[k]

    for out in _map(run, list(range(len(inputs))), args.jobs):
        print(out)


def cmd_segment_coarse(args):
    f = SpectralFilterSpec(args.radius)
    p = CoarseSegParams(
        args.binarize_threshold,
        args.opening_kernel,
        args.opening_iterations,
        args.connectivity,
        args.min_area,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run(path):
        lm, ann = coarse_segment(load_image(path), f, p)
        stem = Path(path).stem
        lab_path = out_dir / f"{stem}_labels.png"
        save_label_png(lab_path, lm)
        _write_manifest(lab_path, args)
        save_annotations(out_dir / f"{stem}_instances.json", ann)
        return stem, len(ann)

    for stem, n in _map(run, list(args.input), args.jobs):
        print(f"{stem}\t{n}")


def cmd_filter(args):
    preds = load_annotations(args.pred)
    g = GuideMask(load_guide(args.guide), "soft")
    kept, decisions = filter_instances(preds, g, args.threshold)
    save_annotations(args.out, kept)
    _write_manifest(args.out, args)
    if args.report:
        write_decisions_csv(args.report, decisions)
    print(f"kept {len(kept)} of {len(preds)}")


def cmd_eval(args):
    if len(args.gt) != len(args.pred):
        raise ValueError("pred: need one prediction per ground-truth file")

    def run(pair):
        gt, pred = load_label_map(pair[0]), load_label_map(pair[1])
        return evaluate(gt, pred), pq_match(gt, pred)

    results = _map(run, list(zip(args.gt, args.pred)), args.jobs)
    agg = aggregate([r.aji for r, _ in results], [s for _, s in results])
    fields = ["aji", "dq", "sq", "pq", "tp", "fp", "fn"]
    rows = [(Path(g).stem, r) for g, (r, _) in zip(args.gt, results)] + [("aggregate", agg)]
    with open(args.report, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["image_id", *fields])
        for image_id, rep in rows:
            row = rep.as_row()
            wr.writerow([image_id] + [_fmt(row[k]) if k in ("aji", "dq", "sq", "pq") else row[k] for k in fields])
    print(f"aji={_fmt(agg.aji)} dq={_fmt(agg.dq)} sq={_fmt(agg.sq)} pq={_fmt(agg.pq)}")


def cmd_dataset_crop(args):
    cfg = CropConfig(args.patch_size, args.stride, args.min_fraction, args.crop_min_area)
    image = load_image(args.image)
    ann = load_annotations(args.ann)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    patches = crop_patches(image, ann, cfg)
    for patch in patches:
        name = patch.name(stem)
        save_rgb_png(out_dir / f"{name}.png", patch.image)
        _write_manifest(out_dir / f"{name}.png", args)
        save_annotations(out_dir / f"{name}.json", patch.annotations)
    print(f"{len(patches)} patches")


def cmd_dataset_weaken(args):
    _require_seed(args)
    if args.keep is None:
        raise UsageError("keep: --keep is required")
    w = WeakenConfig(args.keep, args.seed)
    if len(args.ann) > 1 or args.out is None:
        if args.out_dir is None:
            raise UsageError("out-dir: required for multiple inputs (or give --out)")
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        outs = [Path(args.out_dir) / Path(p).name for p in args.ann]
    else:
        outs = [Path(args.out)]
    print(f"# seed={args.seed}")
    for src, out in zip(args.ann, outs):
        weak = weaken_annotations(load_annotations(src), w)
        save_annotations(out, weak)
        _write_manifest(out, args)
        print(f"{out}\t{len(weak)}")


def cmd_check_grad(args):
    _require_seed(args)
    if args.trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(args.seed)
    rows = []
    for t in range(args.trials):
        pred = rng.uniform(0.05, 0.95, (4, 4))
        target = rng.uniform(0, 1, (4, 4))
        rep = check_gradient(
            lambda x: bce_loss(x, target), lambda x: bce_grad(x, target), pred, args.step, args.tol
        )
        rows.append(("bce", t, rep.max_rel_err, rep.passed))
    for t in range(args.trials):
        n, dim = 5, 3
        pos = (np.arange(n) + 1 + rng.integers(0, n - 1, n)) % n
        z0 = rng.normal(size=(n, dim))

        def loss(z):
            return info_nce_loss(EmbeddingSet(z, pos), args.temperature)

        def grad(z):
            return info_nce_grad(EmbeddingSet(z, pos), args.temperature)

        rep = check_gradient(loss, grad, z0, args.step, args.tol)
        rows.append(("info_nce", t, rep.max_rel_err, rep.passed))
    with open(args.report, "w", newline="") as fh:
        fh.write(f"# seed={args.seed}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["kernel", "trial", "max_rel_err", "pass"])
        for kernel, t, err, ok in rows:
            wr.writerow([kernel, t, format(err, ".6e"), str(ok).lower()])
    n_fail = sum(not ok for *_, ok in rows)
    print(f"# seed={args.seed}\n{len(rows) - n_fail}/{len(rows)} gradient checks passed")


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value config file with module sections")
    common.add_argument("--jobs", type=int, help="parallel workers for multi-image commands")

    p = _Parser(prog="frg", description="Fourier guide masks, coarse segmentation, metrics.")
    p.add_argument("--version", action="version", version=f"frg {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    guide = sub.add_parser("guide", help="guide mask generation")
    gsub = guide.add_subparsers(dest="action", required=True, parser_class=_Parser)
    gen = gsub.add_parser("gen", parents=[common], help="generate soft or hard guide masks")
    gen.add_argument("--input", nargs="+", required=True)
    gen.add_argument("--out", help="output file (.frgr or .png) for a single input")
    gen.add_argument("--out-dir")
    gen.add_argument("--format", choices=["frgr", "png"], default="frgr")
    gen.add_argument("--radius", type=float)
    gen.add_argument("--gt", nargs="+", help="binary ground truth to fuse, one per input")
    gen.add_argument("--hard", action="store_true")
    gen.add_argument("--harden-threshold", type=float)
    gen.set_defaults(func=cmd_guide_gen)

    seg = sub.add_parser("segment", help="training-free segmentation")
    ssub = seg.add_subparsers(dest="action", required=True, parser_class=_Parser)
    co = ssub.add_parser("coarse", parents=[common], help="coarse instances from the guide mask")
    co.add_argument("--input", nargs="+", required=True)
    co.add_argument("--out-dir", required=True)
    co.add_argument("--radius", type=float)
    co.add_argument("--binarize-threshold", type=float)
    co.add_argument("--opening-kernel", type=int)
    co.add_argument("--opening-iterations", type=int)
    co.add_argument("--connectivity", type=int)
    co.add_argument("--min-area", type=int)
    co.set_defaults(func=cmd_segment_coarse)

    flt = sub.add_parser("filter", parents=[common], help="drop instances without guide support")
    flt.add_argument("--pred", required=True)
    flt.add_argument("--guide", required=True)
    flt.add_argument("--threshold", type=float)
    flt.add_argument("--out", required=True)
    flt.add_argument("--report")
    flt.set_defaults(func=cmd_filter, action="")

    ev = sub.add_parser("eval", parents=[common], help="AJI / DQ / SQ / PQ report")
    ev.add_argument("--gt", nargs="+", required=True)
    ev.add_argument("--pred", nargs="+", required=True)
    ev.add_argument("--report", required=True)
    ev.set_defaults(func=cmd_eval, action="")

    ds = sub.add_parser("dataset", help="dataset preparation")
    dsub = ds.add_subparsers(dest="action", required=True, parser_class=_Parser)
    crop = dsub.add_parser("crop", parents=[common], help="tile an image and its annotations")
    crop.add_argument("--image", required=True)
    crop.add_argument("--ann", required=True)
    crop.add_argument("--out-dir", required=True)
    crop.add_argument("--patch-size", type=int)
    crop.add_argument("--stride", type=int)
    crop.add_argument("--min-fraction", type=float)
    crop.add_argument("--min-area", dest="crop_min_area", type=int)
    crop.set_defaults(func=cmd_dataset_crop)
    weak = dsub.add_parser("weaken", parents=[common], help="randomly keep a fraction of instances")
    weak.add_argument("--ann", nargs="+", required=True)
    weak.add_argument("--keep", type=float)
    weak.add_argument("--seed", type=int)
    weak.add_argument("--out")
    weak.add_argument("--out-dir")
    weak.set_defaults(func=cmd_dataset_weaken)

    kr = sub.add_parser("kernels", help="loss kernel utilities")
    ksub = kr.add_subparsers(dest="action", required=True, parser_class=_Parser)
    cg = ksub.add_parser("check-grad", parents=[common], help="finite-difference gradient checks")
    cg.add_argument("--seed", type=int)
    cg.add_argument("--trials", type=int)
    cg.add_argument("--temperature", type=float)
    cg.add_argument("--step", type=float)
    cg.add_argument("--tol", type=float)
    cg.add_argument("--report", required=True)
    cg.set_defaults(func=cmd_check_grad)
    return p


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _read_config(args.config) if getattr(args, "config", None) else {}
        _resolve(args, config)
        log.debug("running %s %s with %s", args.command, args.action, _params(args))
        args.func(args)
    except UsageError as exc:
        print(f"frg: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FormatError, OSError) as exc:
        print(f"frg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, OverflowError) as exc:
        print(f"frg: invalid value: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
