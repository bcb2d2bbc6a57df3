"""Command-line interface.

Subcommands cover the full workflow: mask generation, sensor simulation,
single-view and stereo reconstruction, batch evaluation against ground
truth, and synthetic test-scene generation. Exit codes: 0 success, 1 bad
input, 2 internal error.
"""

import argparse
from pathlib import Path
import sys

from .errors import InputError, NrstereoError
from .fse import reconstruct_any
from .metrics import summarize
from .pipeline import (
    PipelineConfig,
    load_config,
    run_batch,
    run_single_view,
    run_stereo,
    save_config,
)
from .raster import load_image, save_image
from .sampling import apply_mask, classes_to_image, generate_mask, mask_to_image
from .stereo import disparity_to_image
from . import synth


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return cfg


def _lr_mask_for(image, seed):
    if image.width % 2 or image.height % 2:
        raise InputError(
            f"image dimensions must be even for quarter sampling, got "
            f"{image.width}x{image.height}"
        )
    return generate_mask(image.width // 2, image.height // 2, seed)


def _cmd_mask(args):
    mask = generate_mask(args.lr_width, args.lr_height, args.seed)
    save_image(mask_to_image(mask), args.out)
    print(f"wrote {args.out} ({mask.width}x{mask.height}, density {mask.density():.4f})")
    return 0


def _cmd_sample(args):
    hr = load_image(args.image)
    mask = _lr_mask_for(hr, args.seed)
    view = apply_mask(hr, mask)
    out = Path(args.out)
    save_image(view.image, out)
    mask_path = out.with_name(out.stem + ".mask" + out.suffix)
    save_image(mask_to_image(mask), mask_path)
    print(f"wrote {out} and {mask_path}")
    return 0


def _cmd_reconstruct_sv(args):
    hr = load_image(args.image)
    _lr_mask_for(hr, args.seed)
    cfg = _load_cfg(args)
    out = run_single_view(hr, args.seed, cfg)
    save_image(out, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_reconstruct_stereo(args):
    left = load_image(args.left)
    right = load_image(args.right)
    cfg = _load_cfg(args)
    _lr_mask_for(left, cfg.mask_seed_left)
    _lr_mask_for(right, cfg.mask_seed_right)
    result = run_stereo(left, right, cfg)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_image(result.final_left, outdir / "left_final.png")
    save_image(result.final_right, outdir / "right_final.png")
    save_image(result.first_left, outdir / "left_first.png")
    save_image(result.first_right, outdir / "right_first.png")
    save_image(disparity_to_image(result.disp_left), outdir / "disparity_left.png")
    save_image(disparity_to_image(result.disp_right), outdir / "disparity_right.png")
    save_image(classes_to_image(result.merged_left), outdir / "classes_left.png")
    save_image(classes_to_image(result.merged_right), outdir / "classes_right.png")
    (outdir / "stats.txt").write_text(result.stats.as_text())
    print(f"wrote {outdir}/ (8 images + stats.txt)")
    return 0


def _cmd_evaluate(args):
    cfg = _load_cfg(args)
    overrides = {}
    if args.pairings:
        overrides["pairings"] = args.pairings
    if args.outdir:
        overrides["output_dir"] = args.outdir
    if args.workers:
        overrides["workers"] = args.workers
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    report = run_batch(args.dataset, cfg, save_outputs=not args.no_images)
    if not report.entries:
        print("error: no scene produced any result", file=sys.stderr)
        return 1
    base = Path(args.report)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_suffix(".csv")
    md_path = base.with_suffix(".md")
    report.to_csv(csv_path)
    md_path.write_text(report.to_markdown())
    dp, ds, used, _ = summarize(report.entries)
    print(f"wrote {csv_path} and {md_path}")
    print(f"{len(report.entries)} rows, mean dPSNR {dp:+.4f} dB, mean dSSIM {ds:+.6f} over {used} finite rows")
    return 0


def _cmd_synth_pair(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.kind in ("shifted", "all"):
        left, right = synth.shifted_pair(args.width, args.height, args.seed, args.shift)
        save_image(left, out / "shifted_left.png")
        save_image(right, out / "shifted_right.png")
        wrote += ["shifted_left.png", "shifted_right.png"]
    if args.kind in ("occlusion", "all"):
        left, right = synth.occlusion_pair(seed=args.seed)
        save_image(left, out / "occlusion_left.png")
        save_image(right, out / "occlusion_right.png")
        wrote += ["occlusion_left.png", "occlusion_right.png"]
    if args.kind in ("scenes", "all"):
        paths = synth.write_dataset(out)
        wrote += [str(p.relative_to(out)) for p in paths]
    print(f"wrote {len(wrote)} files under {out}/")
    return 0


def _cmd_init_config(args):
    save_config(PipelineConfig(), args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = _Parser(prog="nrstereo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mask", parents=[], help="generate a quarter-sampling mask image")
    p.add_argument("--lr-width", type=int, required=True)
    p.add_argument("--lr-height", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("sample", help="simulate a masked-sensor capture of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("reconstruct-sv", help="single-view reconstruction from a fresh capture")
    p.add_argument("--image", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reconstruct_sv)

    p = sub.add_parser("reconstruct-stereo", help="stereo-assisted reconstruction of a rectified pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--config")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=_cmd_reconstruct_stereo)

    p = sub.add_parser("evaluate", help="batch evaluation of a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config")
    p.add_argument("--pairings", help="comma list like view1:view2,view1:view5")
    p.add_argument("--report", required=True, help="base path for .csv and .md outputs")
    p.add_argument("--outdir", help="directory for reconstructed images")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-images", action="store_true", help="skip writing per-scene images")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("synth-pair", help="generate synthetic test scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("shifted", "occlusion", "scenes", "all"), default="all")
    p.add_argument("--shift", type=int, default=5)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth_pair)

    p = sub.add_parser("init-config", help="write the default configuration file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_init_config)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits on usage errors and --help; keep main returning int
        return e.code if isinstance(e.code, int) else 1
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NrstereoError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # unexpected bug, still a clean exit code
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
