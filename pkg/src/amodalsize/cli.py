"""Batch command-line driver.

Subcommands::

    simulate      synthetic annotations + ground-truth sidecar
    complete      fill amodal boxes (identity or oracle)
    infer         object sizes, cameras and depths
    eval-amodal   mean amodal IoU and amodal AP tables
    focal         parse | bins | quantize | eval

Exit codes: 0 success, 2 input error, 3 numerical failure,
4 non-convergence (outputs are still written).
"""

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io, synth
from .boxes import DetectionRecord, SUBSETS, ap_amodal, mean_amodal_iou
from .errors import AmodalSizeError, InputError, NotConvergedWarning
from .exif_focal import (ExifError, FocalBinner, chance_rankings, eval_topk, focal_pixels,
                         focal_ratio, mode_ranking, parse_exif_focal, rank_scores)
from .size_inference import SizeEstimator, camera_height_summary
from .svg import histogram_svg

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 2, 3, 4

SIMULATE_DEFAULTS = {
    "n_images": 200,
    "min_objects": 5,
    "max_objects": 8,
    "min_categories": 2,
    "f_min": 500.0,
    "f_max": 500.0,
    "h_c_median": 1.4,
    "h_c_log_sd": 0.2,
    "theta_max_deg": 0.0,
    "image_w": 1000.0,
    "image_h": 1000.0,
    "d_min": 3.0,
    "d_max": 30.0,
    "projection": "approx",
    "noise_px": 0.0,
    "p_occlude": 0.0,
    "crop_min": 0.4,
    "crop_max": 0.4,
    "sides": "bottom",
    "truncate_at_border": False,
}

INFER_DEFAULTS = {
    "tol": 1e-6,
    "max_iters": 50,
    "eps_px": 1.0,
    "huber_delta": None,
    "prior.enabled": False,
    "prior.h_c0": 1.4,
    "prior.strength": 1e-2,
    "hist_bins": 20,
}


def _effective(defaults, config, seed):
    unknown = sorted(k for k in config if k not in defaults
                     and not k.startswith(("category.", "clusters.")))
    if unknown:
        raise InputError(f"unknown config keys: {unknown}")
    eff = dict(defaults)
    eff.update(config)
    if seed is not None:
        eff["seed"] = seed
    eff.setdefault("seed", 0)
    return eff


def _categories(cfg):
    cats = {}
    for key, value in cfg.items():
        if not key.startswith("category."):
            continue
        name = key.split(".", 1)[1]
        parts = [float(p) for p in str(value).split(",")]
        height = parts[0]
        log_sd = parts[1] if len(parts) > 1 else 0.0
        if height <= 0:
            raise InputError(f"{key}: height must be positive")
        cats[name] = (math.log(height), log_sd ** 2)
    return cats or dict(synth.DEFAULT_CATEGORIES)


def cmd_simulate(args):
    cfg = _effective(SIMULATE_DEFAULTS, io.read_config(args.config), args.seed)
    seed = int(cfg["seed"])
    cats = _categories(cfg)
    theta = math.radians(float(cfg["theta_max_deg"]))
    scenes = synth.sample_dataset(
        seed, int(cfg["n_images"]), cats,
        synth.CameraPriors((cfg["f_min"], cfg["f_max"]), cfg["h_c_median"],
                           cfg["h_c_log_sd"], (-theta, theta),
                           cfg["image_w"], cfg["image_h"]),
        synth.LayoutPriors(int(cfg["min_objects"]), int(cfg["max_objects"]),
                           (cfg["d_min"], cfg["d_max"]), int(cfg["min_categories"])))
    records = synth.render_dataset(scenes, cfg["projection"])
    records = synth.jitter(records, float(cfg["noise_px"]), seed)
    spec = synth.OcclusionSpec(float(cfg["p_occlude"]),
                               (float(cfg["crop_min"]), float(cfg["crop_max"])),
                               tuple(s.strip() for s in str(cfg["sides"]).split(",")),
                               bool(cfg["truncate_at_border"]))
    visible = synth.occlude(records, spec, seed)
    focal = {s.image_id: s.f for s in scenes}
    annotations = [r.with_amodal(r.amodal, focal_px=focal[r.image_id]) for r in visible]

    out = Path(args.out)
    io.write_records(out / "annotations.jsonl", annotations,
                     io.header_line("annotations", cfg, seed))
    io.write_sidecar(out / "truth.jsonl", scenes, records,
                     io.header_line("truth", cfg, seed), cfg["projection"])
    init = {c: math.exp(m) for c, (m, _) in cats.items()}
    io.write_init_heights(out / "init_heights.txt", init,
                          io.header_line("init_heights", cfg, seed))
    print(f"wrote {len(annotations)} instances in {len(scenes)} images to {out}")
    return EXIT_OK


def cmd_complete(args):
    """Replace every record's amodal box according to ``--strategy``."""
    records = io.read_records(args.inp)
    cfg = {"strategy": args.strategy, "input": Path(args.inp).name}
    if args.strategy == "identity":
        done = [r.with_amodal(r.modal, provenance="identity") for r in records]
    else:
        if not args.truth:
            raise InputError("oracle completion needs --truth (the ground-truth sidecar)")
        _, instances = io.read_sidecar(args.truth)
        done = []
        for r in records:
            key = (r.image_id, r.instance)
            if key not in instances or instances[key]["amodal"] is None:
                raise InputError(f"no ground-truth amodal box for {key}")
            done.append(r.with_amodal(instances[key]["amodal"], provenance="oracle"))
    io.write_records(args.out, done, io.header_line("completed", cfg, args.seed or 0))
    return EXIT_OK


def _infer_estimator(cfg, init):
    clusters = {k.split(".", 1)[1]: int(v) for k, v in cfg.items()
                if k.startswith("clusters.")}
    return SizeEstimator(
        init_heights=init, n_clusters=clusters or 1, tol=float(cfg["tol"]),
        max_iters=int(cfg["max_iters"]), eps_px=float(cfg["eps_px"]),
        huber_delta=None if cfg["huber_delta"] is None else float(cfg["huber_delta"]),
        prior_enabled=bool(cfg["prior.enabled"]), prior_h_c0=float(cfg["prior.h_c0"]),
        prior_strength=float(cfg["prior.strength"]))


def cmd_infer(args):
    cfg = _effective(INFER_DEFAULTS, io.read_config(args.config), args.seed)
    records = io.read_records(args.inp)
    if not records:
        raise InputError(f"{args.inp}: no annotation records")
    init = io.read_init_heights(args.init)
    est = _infer_estimator(cfg, init)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NotConvergedWarning)
        est.fit(records)
    converged = not any(issubclass(w.category, NotConvergedWarning) for w in caught)

    out = Path(args.out)
    cfg["init"] = init
    header = io.header_line("infer", cfg, cfg["seed"])
    model = est.size_model_
    cats = np.array([r.category for r in records], dtype=object)
    rows = []
    for c in model.clusters:
        mean, var, weight = model.gmm[c.category][c.cluster_id]
        n = int(np.sum((cats == c.category) & (est.assignments_ == c.cluster_id)))
        rows.append([c.category, c.cluster_id, c.log_height, c.height, mean, var, weight, n])
    io.write_table(out / "sizes.tsv", header,
                   ["category", "cluster", "log_height", "height_m", "gmm_mean",
                    "gmm_var", "gmm_weight", "n_instances"], rows)

    io.write_table(out / "cameras.tsv", header, ["image_id", "h_c", "y_h", "clamped"],
                   [[c.image_id, c.h_c, c.y_h, int(c.clamped)] for c in est.cameras_])

    depth_rows = []
    for r, a, rel in zip(records, est.assignments_, est.relative_depths_):
        f = r.extra.get("focal_px")
        depth_rows.append([r.image_id, r.instance, r.category, int(a), float(rel),
                           None if f is None else float(f) * float(rel)])
    io.write_table(out / "depths.tsv", header,
                   ["image_id", "instance", "category", "cluster", "depth_over_f", "depth_m"],
                   depth_rows)

    io.write_table(out / "loss.tsv", header,
                   ["iteration", "loss_before_camera", "loss", "max_change",
                    "n_observations", "reassigned"],
                   [[t["iteration"], t["loss_before_camera"], t["loss"], t["max_change"],
                     t["n_observations"], t["reassigned"]] for t in est.loss_trace_])

    bins = int(cfg["hist_bins"])
    hist_rows = []
    for cat in sorted(set(cats)):
        values = est.instance_log_heights_[cats == cat]
        lo, hi = float(values.min()), float(values.max())
        if hi - lo < 1e-9:
            lo, hi = lo - 0.05, hi + 0.05
        counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
        for k, cnt in enumerate(counts):
            hist_rows.append([cat, k, float(edges[k]), float(edges[k + 1]), int(cnt)])
        mean = float(np.average([c.log_height for c in model.clusters if c.category == cat],
                                weights=[w for _, _, w in model.gmm[cat]]))
        io.write_text(out / f"size_hist_{cat}.svg",
                      histogram_svg(counts, edges, f"{cat}: log height (m)", mean, header))
    io.write_table(out / "size_hist.tsv", header,
                   ["category", "bin", "lo", "hi", "count"], hist_rows)

    if est.cameras_:
        median, (counts, edges) = camera_height_summary(est.cameras_, bins)
        summary = [["median_h_c", median], ["n_cameras", len(est.cameras_)],
                   ["iterations", est.n_iter_], ["converged", int(converged)],
                   ["final_loss", est.final_loss_]]
        io.write_table(out / "summary.tsv", header, ["statistic", "value"], summary)
        io.write_table(out / "camera_hist.tsv", header, ["bin", "lo", "hi", "count"],
                       [[k, float(edges[k]), float(edges[k + 1]), int(c)]
                        for k, c in enumerate(counts)])
        io.write_text(out / "camera_hist.svg",
                      histogram_svg(counts, edges, "camera height (m)", median, header))
    if not converged:
        print(f"warning: not converged after {est.n_iter_} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_eval_amodal(args):
    preds = io.read_records(args.inp)
    truth = io.read_records(args.truth)
    truth_by_key = {(t.image_id, t.instance): t for t in truth}
    pred_keys = {(p.image_id, p.instance) for p in preds}
    if pred_keys != set(truth_by_key):
        diff = sorted(pred_keys ^ set(truth_by_key))[:5]
        raise InputError(f"prediction and truth instance ids differ, e.g. {diff}")
    for t in truth:
        if t.amodal is None:
            raise InputError(f"truth record {(t.image_id, t.instance)} has no amodal box")
    pairs = []
    for p in preds:
        if p.amodal is None:
            raise InputError(f"prediction {(p.image_id, p.instance)} has no amodal box")
        pairs.append((p.amodal, truth_by_key[(p.image_id, p.instance)]))
    cfg = {"predictions": Path(args.inp).name, "truth": Path(args.truth).name,
           "iou_thresh": args.iou}
    header = io.header_line("eval_amodal", cfg, args.seed or 0)

    row = ["mean_iou"]
    for subset in SUBSETS:
        try:
            row.append(mean_amodal_iou(pairs, subset))
        except InputError:
            row.append(None)
    out = Path(args.out)
    io.write_table(out / "mean_iou.tsv", header, ["metric", *SUBSETS], [row])

    if args.detections:
        dets = io.read_detections(args.detections)
    else:
        dets = [DetectionRecord(p.image_id, p.category, float(p.extra.get("score", 1.0)),
                                p.modal, p.amodal) for p in preds]
    ap = ap_amodal(dets, truth, args.iou)
    ap_modal = ap_amodal(dets, truth, args.iou, require_amodal=False)
    rows = [[c, 100.0 * ap[c], 100.0 * ap_modal[c]] for c in sorted(ap)]
    rows.append(["mean", 100.0 * float(np.mean(list(ap.values()))),
                 100.0 * float(np.mean(list(ap_modal.values())))])
    io.write_table(out / "ap_amodal.tsv", header, ["category", "ap_amodal", "ap_modal"], rows)
    return EXIT_OK


def _focal_parse(args):
    sensors = io.read_sensor_table(args.sensors) if args.sensors else {}
    model = _read_model(args.model) if args.model else None
    rows = []
    failures = 0
    for path in args.inp:
        name = Path(path).name
        try:
            meta = parse_exif_focal(Path(path).read_bytes())
            width = None
            if meta.make and meta.model:
                width = sensors.get((meta.make.lower(), meta.model.lower()))
            ratio = focal_ratio(meta, width)
        except (ExifError, InputError, OSError) as exc:
            failures += 1
            code = getattr(exc, "code", type(exc).__name__)
            rows.append([name, None, None, None, None, None, code])
            continue
        log_ratio = math.log(ratio)
        fpx = focal_pixels(ratio, meta.image_width_px) if meta.image_width_px else None
        b = int(model.transform([log_ratio])[0]) if model is not None else None
        num, den = meta.focal_length_mm
        rows.append([name, f"{num}/{den}", ratio, log_ratio, fpx, b, "ok"])
    cfg = {"sensors": bool(sensors), "model": bool(model)}
    io.write_table(args.out, io.header_line("focal_parse", cfg, args.seed or 0),
                   ["image_id", "focal_length_mm", "ratio", "log_ratio", "focal_px", "bin",
                    "status"], rows)
    return EXIT_INPUT if failures and failures == len(rows) else EXIT_OK


def _read_values(path):
    rows = io.read_table(path)
    values = [float(r["log_ratio"]) for r in rows if r.get("log_ratio", "NA") != "NA"]
    ids = [r.get("image_id", str(k)) for k, r in enumerate(rows)
           if r.get("log_ratio", "NA") != "NA"]
    return ids, values


def _read_model(path):
    centers = np.array([float(r["center"]) for r in io.read_table(path)])
    model = FocalBinner(len(centers))
    model.centers_ = centers
    model.boundaries_ = (centers[1:] + centers[:-1]) / 2.0
    return model


def _focal_bins(args):
    _, values = _read_values(args.inp[0])
    model = FocalBinner(args.k).fit(values)
    cfg = {"k": args.k, "n": len(values)}
    io.write_table(args.out, io.header_line("focal_bins", cfg, args.seed or 0),
                   ["bin", "center", "upper_boundary"],
                   [[k, float(c), float(model.boundaries_[k]) if k < args.k - 1 else None]
                    for k, c in enumerate(model.centers_)])
    return EXIT_OK


def _focal_quantize(args):
    if not args.model:
        raise InputError("quantize needs --model")
    model = _read_model(args.model)
    ids, values = _read_values(args.inp[0])
    bins = model.transform(values)
    io.write_table(args.out, io.header_line("focal_quantize", {"k": len(model.centers_)},
                                            args.seed or 0),
                   ["image_id", "log_ratio", "bin"],
                   [[i, v, int(b)] for i, v, b in zip(ids, values, bins)])
    return EXIT_OK


def _focal_eval(args):
    truth_rows = io.read_table(args.truth)
    truth = {r["image_id"]: int(r["bin"]) for r in truth_rows}
    ids = sorted(truth)
    k_list = [int(k) for k in args.topk.split(",")]
    seed = args.seed or 0
    if args.baseline == "chance":
        rankings = chance_rankings(len(ids), args.k, seed)
    elif args.baseline == "mode":
        if not args.train:
            raise InputError("mode baseline needs --train")
        train = [int(r["bin"]) for r in io.read_table(args.train)]
        rankings = np.tile(mode_ranking(train, args.k), (len(ids), 1))
    else:
        if not args.inp:
            raise InputError("focal eval needs --in scores or --baseline")
        pid, scores = io.read_scores(args.inp[0])
        lookup = dict(zip(pid, scores))
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise InputError(f"no scores for images {missing[:5]}")
        rankings = rank_scores([lookup[i] for i in ids])
    errors = eval_topk(rankings, [truth[i] for i in ids], k_list)
    cfg = {"baseline": args.baseline, "topk": k_list, "k": args.k}
    io.write_table(args.out, io.header_line("focal_eval", cfg, seed),
                   ["k", "error_rate"], [[k, errors[k]] for k in k_list])
    return EXIT_OK


def cmd_focal(args):
    return {"parse": _focal_parse, "bins": _focal_bins, "quantize": _focal_quantize,
            "eval": _focal_eval}[args.action](args)


def build_parser():
    parser = argparse.ArgumentParser(prog="amodalsize", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inp=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True)
        if inp:
            p.add_argument("--in", dest="inp", required=True)

    p = sub.add_parser("simulate", help="write synthetic annotations and ground truth")
    p.add_argument("--config")
    common(p, inp=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("complete", help="fill amodal boxes")
    common(p)
    p.add_argument("--strategy", choices=("identity", "oracle"), default="identity")
    p.add_argument("--truth", help="ground-truth sidecar (oracle strategy)")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("infer", help="estimate sizes, cameras and depths")
    common(p)
    p.add_argument("--init", required=True, help="init heights file")
    p.add_argument("--config")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval-amodal", help="mean amodal IoU and AP^am tables")
    common(p)
    p.add_argument("--truth", required=True)
    p.add_argument("--detections")
    p.add_argument("--iou", type=float, default=0.5)
    p.set_defaults(func=cmd_eval_amodal)

    p = sub.add_parser("focal", help="focal-length parsing, binning and evaluation")
    p.add_argument("action", choices=("parse", "bins", "quantize", "eval"))
    p.add_argument("--in", dest="inp", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--topk", default="1,3,5")
    p.add_argument("--model")
    p.add_argument("--sensors")
    p.add_argument("--truth")
    p.add_argument("--train")
    p.add_argument("--baseline", choices=("chance", "mode"))
    p.set_defaults(func=cmd_focal)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AmodalSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
