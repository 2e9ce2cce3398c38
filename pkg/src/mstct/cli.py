"""``mstct`` command line: generate, train, eval, gradcheck, flops, infer, sweep.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import numerics as nx
from .checkpoint import CheckpointError, load_checkpoint, read_index, save_checkpoint
from .config import ConfigError, RunConfig, build_run_config
from .dataio import (
    DatasetError, SpecError, SyntheticSpec, generate_synthetic_dataset, load_dataset, save_dataset,
    sliding_window_infer,
)
from .metrics import evaluate
from .dataio import Window
from .model import (
    Predictor, classifier_forward, desk_config, encoder_forward, estimate_flops, global_relational_block,
    init_params, local_relational_block, full_scale_config, temporal_merge, ts_mixer,
)
from .supervision import ActionInstance, AnnotationError
from .train import NumericalError, predict_videos, train, window_loss

log = logging.getLogger("mstct")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
GRADCHECK_TOL = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _positive(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _int_list(v: str) -> list[int]:
    try:
        out = [int(x) for x in v.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {v!r}") from None
    if any(x < 0 for x in out):
        raise argparse.ArgumentTypeError("values must be >= 0")
    return out


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    spec = SyntheticSpec(num_videos=args.videos, num_classes=args.classes, dim=args.dim,
                         length_range=(args.len_min, args.len_max), noise=args.noise, seed=args.seed)
    ds = generate_synthetic_dataset(spec)
    save_dataset(ds, out, extra={"generator": spec.to_dict()})
    n_inst = sum(len(v.instances) for v in ds.videos)
    frames = sum(v.length for v in ds.videos)
    print(f"wrote {len(ds)} videos ({frames} tokens, {n_inst} instances) to {out}")
    print(f"classes: {ds.num_classes}  dim: {ds.dim}  composites: {ds.composites}")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    return build_run_config(args.config, args.ablate or ())


def _write_train_outputs(out: Path, run: RunConfig, result) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "ckpt", result.params, run.model,
                    extra={"val_ids": result.val_ids, "best_epoch": result.best_epoch, "seed": run.seed})
    (out / "config.txt").write_text(run.to_text())
    (out / "history.json").write_text(json.dumps(result.history, indent=1))
    (out / "report.json").write_text(result.report.to_json())
    (out / "per_class.csv").write_text(result.report.csv_rows())


def cmd_train(args) -> int:
    run = _run_config(args)
    ds = load_dataset(args.data)
    result = train(ds, run)
    out = Path(args.out)
    _write_train_outputs(out, run, result)
    print(f"best validation mAP {result.best_val_map:.4f} at epoch {result.best_epoch}; outputs in {out}")
    return EXIT_OK


def _eval_subset(ds, args, index):
    if args.split == "val":
        ids = set((index or {}).get("extra", {}).get("val_ids", []))
        if not ids:
            raise ConfigError("--split val needs a checkpoint that records its validation videos")
        return ds.subset([i for i, v in enumerate(ds.videos) if v.video_id in ids])
    return ds


def cmd_eval(args) -> int:
    ds = load_dataset(args.data)
    taus = args.tau
    if args.oracle:
        sub = ds
        labels = [v.labels(ds.num_classes) for v in sub.videos]
        preds = labels
    else:
        if not args.ckpt:
            raise ConfigError("--ckpt is required unless --oracle is given")
        index = read_index(args.ckpt)
        params, cfg = load_checkpoint(args.ckpt)
        sub = _eval_subset(ds, args, index)
        stride = args.stride or cfg.T // 2
        preds = predict_videos(params, cfg, sub, stride)
        labels = [v.labels(cfg.C) for v in sub.videos]
    report = evaluate(preds, labels, taus, args.threshold)
    text = report.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    if args.csv:
        Path(args.csv).write_text(report.csv_rows())
    print(f"mAP {report.mAP:.4f} over {report.frames} frames")
    for tau, m in report.conditional.items():
        print(f"tau={tau}: P_AC {m.precision:.4f} R_AC {m.recall:.4f} F1_AC {m.f1:.4f} "
              f"mAP_AC {m.mAP:.4f} ({m.pairs} pairs)")
    return EXIT_OK


def run_gradchecks(seed: int = 0, samples: int = 4, cfg=None) -> dict[str, float]:
    """Finite-difference checks of each block and of the full model loss (desk config by default)."""
    cfg = cfg or desk_config()
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed)
    x = nx.Tensor(rng.standard_normal((cfg.T, cfg.D0)))
    h = nx.Tensor(rng.standard_normal((cfg.T // 2, cfg.D)))
    fv = nx.Tensor(rng.standard_normal((cfg.T, cfg.fused_dim)))
    w_out = rng.standard_normal((cfg.T, cfg.C))
    w_mix = rng.standard_normal((cfg.T, cfg.fused_dim))
    results = {}

    def scoped(prefix):
        return [t for k, t in params.items() if k.startswith(prefix)]

    def probe(name, f, ps):
        results[name] = nx.grad_check(f, ps, step=1e-5, samples_per_param=samples, seed=seed)

    attn = params.scope("s1.b1.attn")
    probe("global_relational_block", lambda: nx.sum(nx.square(global_relational_block(h, attn, cfg.H))),
          list(attn.values()))
    local = params.scope("s1.b1.local")
    probe("local_relational_block", lambda: nx.sum(nx.square(local_relational_block(h, local, cfg))),
          list(local.values()))
    probe("temporal_merge", lambda: nx.sum(nx.square(temporal_merge(x, 1, params, cfg))), scoped("s1.merge"))
    probe("encoder+mixer", lambda: nx.sum(nx.mul(ts_mixer(encoder_forward(x, params, cfg), params, cfg), w_mix)),
          scoped("s") + scoped("mix"))

    def heads():
        y, g = classifier_forward(fv, params, cfg)
        return nx.add(nx.sum(nx.mul(y, w_out)), nx.sum(nx.mul(g, w_out)))

    probe("classifier_heads", heads, scoped("cls") + scoped("hm"))
    win = Window(x.data, [ActionInstance(0, 2, 7), ActionInstance(2, 5, 12)], np.ones(cfg.T), 0)
    probe("full_model_loss", lambda: window_loss(params, cfg, win).total, params.tensors())
    return results


def cmd_gradcheck(args) -> int:
    results = run_gradchecks(args.seed, args.samples)
    worst = max(results.values())
    for name, err in results.items():
        print(f"{name:28s} max rel err {err:.3e}")
    print(f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOL:g})")
    return EXIT_OK if worst < GRADCHECK_TOL else EXIT_NUMERICAL


def _flops_config(args):
    base = full_scale_config() if args.preset == "full" else desk_config()
    run = build_run_config(args.config, args.set or (), base=RunConfig(model=base))
    return run.model


def cmd_flops(args) -> int:
    cfg = _flops_config(args)
    est = estimate_flops(cfg)
    print(f"{'layer':28s} {'MACs':>16s}")
    stage_tot: dict[str, int] = {}
    for row in est["layers"]:
        print(f"{row.name:28s} {row.macs:16,d}")
        key = row.name.split(".")[0]
        stage_tot[key] = stage_tot.get(key, 0) + row.macs
    print("-" * 45)
    for key, macs in stage_tot.items():
        print(f"{key:28s} {macs:16,d}")
    print(f"total MACs {est['macs']:,d}  FLOPs {est['flops']:,d}  ({est['flops'] / 1e9:.2f} GFLOPs)")
    return EXIT_OK


def infer_video(params, cfg, video, stride):
    """(T0, C) class probabilities and (T0, C) heat-map (or None) via sliding windows."""
    model = Predictor(params, cfg)

    def both(x):
        y, g = model.predict(x)
        return np.concatenate([y, g if g is not None else np.zeros_like(y)], axis=1)

    out = sliding_window_infer(both, video, cfg.T, stride)
    C = cfg.C
    return out[:, :C], (out[:, C:] if cfg.use_heatmap_branch and cfg.use_classification_branch else None)


def cmd_infer(args) -> int:
    params, cfg = load_checkpoint(args.ckpt)
    ds = load_dataset(args.data)
    try:
        video = ds.by_id(args.video)
    except KeyError:
        raise ConfigError(f"video {args.video!r} not in dataset {args.data}") from None
    probs, heat = infer_video(params, cfg, video, args.stride or cfg.T // 2)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token_index", "class", "probability", "heat"])
        for t in range(probs.shape[0]):
            for c in range(probs.shape[1]):
                w.writerow([t, c, repr(float(probs[t, c])), "" if heat is None else repr(float(heat[t, c]))])
    print(f"wrote {probs.shape[0] * probs.shape[1]} rows to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Train once per value of one axis; writes summary.json / summary.csv."""
    if "=" not in args.axis:
        raise ConfigError("--axis must look like KEY=V1,V2,...")
    key, values = args.axis.split("=", 1)
    ds = load_dataset(args.data)
    out = Path(args.out)
    rows = []
    for val in [v for v in values.split(",") if v]:
        overrides = list(args.ablate or ()) + [f"{key}={val}"]
        run = build_run_config(args.config, overrides)
        result = train(ds, run)
        sub = out / f"{key}={val}"
        _write_train_outputs(sub, run, result)
        est = estimate_flops(run.model)
        rows.append({"axis": key, "value": val, "best_val_mAP": result.best_val_map,
                     "best_epoch": result.best_epoch, "flops": est["flops"],
                     "final_loss": result.history[-1]["loss"]})
        print(f"{key}={val}: best val mAP {result.best_val_map:.4f} (epoch {result.best_epoch})")
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(rows, indent=1))
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mstct", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--videos", type=_positive, default=40)
    g.add_argument("--classes", type=_positive, default=5)
    g.add_argument("--dim", type=_positive, default=64)
    g.add_argument("--len-min", type=_positive, default=128)
    g.add_argument("--len-max", type=_positive, default=512)
    g.add_argument("--noise", type=float, default=0.3)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--ablate", action="append", metavar="KEY=VAL")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="per-frame mAP and action-conditional metrics")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt")
    e.add_argument("--tau", type=_int_list, default=[0, 20, 40])
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--stride", type=int, default=0)
    e.add_argument("--split", choices=("all", "val"), default="all")
    e.add_argument("--oracle", action="store_true", help="score ground truth as predictions")
    e.add_argument("--out")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--samples", type=_positive, default=4)
    gc.set_defaults(func=cmd_gradcheck)

    f = sub.add_parser("flops", help="analytic per-layer MAC table")
    f.add_argument("--config")
    f.add_argument("--preset", choices=("full", "desk"), default="full")
    f.add_argument("--set", action="append", metavar="KEY=VAL")
    f.set_defaults(func=cmd_flops)

    i = sub.add_parser("infer", help="dump per-frame probabilities and heat-map as CSV")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--video", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--stride", type=int, default=0)
    i.set_defaults(func=cmd_infer)

    s = sub.add_parser("sweep", help="train across the values of one config axis")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--axis", required=True, metavar="KEY=V1,V2,...")
    s.add_argument("--ablate", action="append", metavar="KEY=VAL")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # training always reports per-epoch progress; -v extends that to sweeps
    chatty = args.verbose or args.command == "train"
    logging.basicConfig(level=logging.INFO if chatty else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, DatasetError, SpecError, CheckpointError, AnnotationError,
            FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
