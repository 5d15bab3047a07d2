"""Command-line surface: gen-chart, fit, render, eval, ablate.

Exit codes: 0 success, 1 usage error (bad flags or config), 2 runtime
failure (I/O, bad files, dimension mismatches).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io as cgs_io
from . import metrics, synth, trainer
from .core import GaussianSet, TrainConfig
from .errors import CgsError, IoFailure
from .rasterizer import render
from .synth import ChartSpec

PRESETS = {
    "chart": {"num_gaussians": 20, "total_iterations": 50_000},
    "davis-few": {"num_gaussians": 1250, "total_iterations": 50_000},
    "davis-many": {"num_gaussians": 7500, "total_iterations": 50_000},
}

# Ablation rows: (contour_guidance, warm_up, remove_clamp).
ABLATION_ROWS = (
    (False, False, False),
    (False, False, True),
    (True, False, False),
    (True, False, True),
    (True, True, False),
    (True, True, True),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cgs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-chart", help="write a synthetic chart and its labels")
    p.add_argument("--kind", choices=("grid", "pie"), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--spec", help="JSON chart spec overriding the defaults")

    p = sub.add_parser("fit", help="fit a Gaussian set to an image")
    p.add_argument("--image", required=True)
    p.add_argument("--labels", help="label-map PNG (required unless --no-guidance)")
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--out", required=True, help="output model path (.cgs)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--no-guidance", action="store_true")
    p.add_argument("--no-warmup", action="store_true")
    p.add_argument("--clamp", action="store_true",
                   help="clamp renders to [0,1] during training")
    p.add_argument("--seed", type=int, help="override the config rng_seed")
    p.add_argument("--iterations", type=int, help="override total_iterations")

    p = sub.add_parser("render", help="render a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--labels")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--base-width", type=int,
                   help="training-time width (defaults to --width)")
    p.add_argument("--base-height", type=int,
                   help="training-time height (defaults to --height)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compare two images, print metrics JSON")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--labels")
    p.add_argument("--band", type=float, default=metrics.DEFAULT_BAND_RADIUS)

    p = sub.add_parser("ablate", help="run the six toggle combinations")
    p.add_argument("--image", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--out-dir", required=True)
    return parser


def _load_config(path, preset) -> TrainConfig:
    cfg = TrainConfig.from_json_file(path) if path else TrainConfig()
    if preset:
        for key, value in PRESETS[preset].items():
            setattr(cfg, key, value)
    return cfg


def _cmd_gen_chart(args) -> int:
    spec = None
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = ChartSpec.from_dict(json.load(fh))
        if spec.kind != args.kind:
            raise UsageError(f"--kind {args.kind} but spec file says {spec.kind!r}")
    elif args.kind == "grid":
        spec = ChartSpec.default_grid()
    else:
        spec = ChartSpec.default_pie()
    gen = synth.gen_grid_chart if args.kind == "grid" else synth.gen_pie_chart
    image, lm = gen(spec)
    out = Path(args.out_dir)
    if not out.is_dir():
        raise IoFailure(f"output directory {out} does not exist")
    cgs_io.save_image(image, out / "target.png")
    cgs_io.save_label_map(lm, out / "labels.png")
    print(json.dumps({"target": str(out / "target.png"),
                      "labels": str(out / "labels.png"),
                      "width": lm.width, "height": lm.height,
                      "regions": lm.region_count}))
    return 0


def _cmd_fit(args) -> int:
    if args.no_guidance and not args.no_warmup:
        raise UsageError("--no-guidance requires --no-warmup "
                         "(warm-up is meaningless without guidance)")
    config = _load_config(args.config, args.preset)
    if args.no_guidance:
        config.contour_guidance = False
    if args.no_warmup:
        config.warm_up = False
    if args.clamp:
        config.remove_clamp = False
    if args.seed is not None:
        config.rng_seed = args.seed
    if args.iterations is not None:
        config.total_iterations = args.iterations
    config.validate()
    if config.contour_guidance and not args.labels:
        raise UsageError("--labels is required unless --no-guidance is given")
    target = cgs_io.load_image(args.image)
    lm = cgs_io.load_label_map(args.labels) if args.labels else None
    gs, report = trainer.fit(target, lm, config)
    out = Path(args.out)
    cgs_io.save_model(gs, out)
    height, width = target.shape[:2]
    lm_used = lm if config.contour_guidance else None
    cgs_io.save_image(render(gs, lm_used, width, height, config),
                      out.with_suffix(".render.png"))
    report.write_json(out.with_suffix(".report.json"))
    report.write_loss_csv(out.with_suffix(".loss.csv"))
    print(json.dumps({"model": str(out), "model_bytes": report.model_bytes,
                      "metrics": report.final_metrics,
                      "wall_clock_sec": report.wall_clock_sec}))
    return 0


def _scaled_model(gs: GaussianSet, sx: float, sy: float) -> GaussianSet:
    """Scale means and Cholesky factors so iso-contours follow the resize."""
    out = gs.copy()
    out.means[:, 0] *= sx
    out.means[:, 1] *= sy
    out.chol[:, 0] *= sx
    out.chol[:, 1] *= sy
    out.chol[:, 2] *= sy
    return out


def _cmd_render(args) -> int:
    gs = cgs_io.load_model(args.model)
    guided = bool(gs.n) and bool(np.any(gs.region_ids != 0))
    if guided and not args.labels:
        raise UsageError("model carries region IDs; --labels is required")
    lm = cgs_io.load_label_map(args.labels) if guided and args.labels else None
    base_w = args.base_width or args.width
    base_h = args.base_height or args.height
    gs = _scaled_model(gs, args.width / base_w, args.height / base_h)
    image = render(gs, lm, args.width, args.height)
    cgs_io.save_image(image, args.out)
    print(json.dumps({"out": args.out, "width": args.width, "height": args.height}))
    return 0


def _cmd_eval(args) -> int:
    ref = cgs_io.load_image(args.ref)
    test = cgs_io.load_image(args.test)
    lm = cgs_io.load_label_map(args.labels) if args.labels else None
    bundle = metrics.evaluate_pair(ref, test, lm, band_radius=args.band)
    if lm is not None and bundle["ef_psnr"] is None:
        print("warning: label map has a single region; edge metrics are null",
              file=sys.stderr)
    print(json.dumps(bundle))
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args.config, None)
    out = Path(args.out_dir)
    if not out.is_dir():
        raise IoFailure(f"output directory {out} does not exist")
    target = cgs_io.load_image(args.image)
    lm = cgs_io.load_label_map(args.labels)
    height, width = target.shape[:2]
    rows = []
    for guidance, warm_up, remove_clamp in ABLATION_ROWS:
        cfg = TrainConfig.from_dict(config.to_dict())
        cfg.contour_guidance = guidance
        cfg.warm_up = warm_up
        cfg.remove_clamp = remove_clamp
        gs, report = trainer.fit(target, lm, cfg)
        tag = f"g{int(guidance)}w{int(warm_up)}c{int(remove_clamp)}"
        lm_used = lm if guidance else None
        cgs_io.save_image(render(gs, lm_used, width, height, cfg),
                          out / f"render_{tag}.png")
        rows.append({
            "contour_guidance": int(guidance),
            "warm_up": int(warm_up),
            "remove_clamp": int(remove_clamp),
            "psnr": report.final_metrics["psnr"],
            "ef_psnr": report.final_metrics["ef_psnr"],
        })
    csv_path = out / "ablation.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(json.dumps({"csv": str(csv_path), "rows": len(rows)}))
    return 0


_COMMANDS = {
    "gen-chart": _cmd_gen_chart,
    "fit": _cmd_fit,
    "render": _cmd_render,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError) as exc:
        # Bad config contents count as usage problems.
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CgsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
