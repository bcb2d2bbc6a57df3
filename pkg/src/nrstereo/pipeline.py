"""End-to-end orchestration: masking, reconstruction, stereo projection.

run_single_view is the baseline path (mask, sample, spectral
reconstruction). run_stereo executes the full cross-view chain on one
rectified pair. run_batch applies both to every scene directory of a
dataset and collects a quality report. All outputs are deterministic for
identical inputs and configuration, independent of the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import configparser
from pathlib import Path
import re
import sys
import time

from .errors import InputError, InvariantError, MissingFileError, NrstereoError
from .fse import FseParams, linear_reconstruct, reconstruct_any
from .metrics import QualityEntry, build_report, psnr, ssim
from .raster import RasterImage, load_image, save_image
from .sampling import apply_mask, classes_to_image, generate_mask
from .stereo import (
    MatchParams,
    compute_disparity,
    consistency_check,
    disparity_to_image,
    merge_views,
    warp_samples,
)

FIRST_PASS_METHODS = ("fse", "linear")
EVAL_VIEW_MODES = ("left", "right", "both")
DEFAULT_PAIRINGS = "view1:view2,view1:view3,view1:view4,view1:view5"


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of the reconstruction pipeline; defaults mirror the
    quarter-sampling evaluation setup (same mask on both sensors)."""

    fse: FseParams = field(default_factory=FseParams)
    match: MatchParams = field(default_factory=MatchParams)
    mask_seed_left: int = 1
    mask_seed_right: int = 1
    first_pass: str = "fse"
    warped_support_weight: float = 1.0
    output_dir: str = "outputs"
    pairings: str = DEFAULT_PAIRINGS
    eval_views: str = "both"
    workers: int = 1
    distance_mm_per_step: int = 40

    def __post_init__(self):
        if self.first_pass not in FIRST_PASS_METHODS:
            raise InputError(f"first_pass must be one of {FIRST_PASS_METHODS}")
        if self.eval_views not in EVAL_VIEW_MODES:
            raise InputError(f"eval_views must be one of {EVAL_VIEW_MODES}")
        if not (0.0 < self.warped_support_weight <= 1.0):
            raise InputError("warped_support_weight must be in (0, 1]")
        if self.workers < 1:
            raise InputError("workers must be >= 1")
        parse_pairings(self.pairings)


def parse_pairings(text):
    """Parse 'view1:view2,view1:view5' into [('view1', 'view2'), ...]."""
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise InputError(f"bad pairing {chunk!r}, expected left:right")
        pairs.append((parts[0], parts[1]))
    if not pairs:
        raise InputError("no view pairings configured")
    return pairs


def pairing_distance_mm(left, right, mm_per_step):
    """Metadata distance label from viewN-style names; 0 when unparseable."""
    ml = re.search(r"(\d+)$", left)
    mr = re.search(r"(\d+)$", right)
    if not ml or not mr:
        return 0
    return abs(int(mr.group(1)) - int(ml.group(1))) * mm_per_step


@dataclass(frozen=True)
class StereoStats:
    """Sample bookkeeping of one stereo run; wall times stay in memory and
    are never written to output files."""

    original_left: int
    original_right: int
    placed_left: int
    placed_right: int
    dropped_left: int
    dropped_right: int
    collisions_left: int
    collisions_right: int
    merged_density_left: float
    merged_density_right: float
    times: dict = field(default_factory=dict, compare=False)

    def as_text(self):
        keys = (
            "original_left",
            "original_right",
            "placed_left",
            "placed_right",
            "dropped_left",
            "dropped_right",
            "collisions_left",
            "collisions_right",
        )
        lines = [f"{k} = {getattr(self, k)}" for k in keys]
        lines.append(f"merged_density_left = {self.merged_density_left:.6f}")
        lines.append(f"merged_density_right = {self.merged_density_right:.6f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StereoResult:
    """Everything produced by one stereo reconstruction."""

    final_left: RasterImage
    final_right: RasterImage
    first_left: RasterImage
    first_right: RasterImage
    disp_left: object
    disp_right: object
    merged_left: object
    merged_right: object
    stats: StereoStats


def _sample(hr, seed):
    mask = generate_mask(hr.width // 2, hr.height // 2, seed)
    return apply_mask(hr, mask)


def _first_pass(view, cfg):
    if cfg.first_pass == "linear":
        return linear_reconstruct(view)
    return reconstruct_any(view, cfg.fse)


def run_single_view(hr, seed, cfg=None):
    """Mask, sample and reconstruct one view (the single-view baseline)."""
    if cfg is None:
        cfg = PipelineConfig()
    return reconstruct_any(_sample(hr, seed), cfg.fse)


def run_stereo(hr_left, hr_right, cfg=None, _prepared=None):
    """Full cross-view chain on a rectified pair.

    Both views are sampled and reconstructed, matched in both directions,
    cleaned by the consistency check, cross-projected, merged, and
    reconstructed again with the enlarged support. When no disparity
    survives the check, the merge adds nothing and the result equals the
    single-view output bit for bit.
    """
    if cfg is None:
        cfg = PipelineConfig()
    if hr_left.shape != hr_right.shape:
        raise InputError(
            f"stereo views disagree: {hr_left.shape} vs {hr_right.shape}"
        )
    times = {}
    t0 = time.perf_counter()
    if _prepared is None:
        sv_left = _sample(hr_left, cfg.mask_seed_left)
        sv_right = _sample(hr_right, cfg.mask_seed_right)
        first_left = _first_pass(sv_left, cfg)
        first_right = _first_pass(sv_right, cfg)
    else:
        sv_left, first_left, sv_right, first_right = _prepared
    times["first_pass"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    raw_left = compute_disparity(first_left, first_right, cfg.match)
    raw_right = compute_disparity(first_right, first_left, cfg.match.mirrored())
    disp_left = consistency_check(raw_left, raw_right, cfg.match.cc_tolerance)
    disp_right = consistency_check(raw_right, raw_left, cfg.match.cc_tolerance)
    times["matching"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    warped_to_left, wstats_l = warp_samples(sv_right, disp_right)
    warped_to_right, wstats_r = warp_samples(sv_left, disp_left)
    merged_left = merge_views(sv_left, warped_to_left)
    merged_right = merge_views(sv_right, warped_to_right)
    times["warp_merge"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final_left = reconstruct_any(merged_left, cfg.fse, cfg.warped_support_weight)
    final_right = reconstruct_any(merged_right, cfg.fse, cfg.warped_support_weight)
    times["final_pass"] = time.perf_counter() - t0

    n_pixels = hr_left.width * hr_left.height
    stats = StereoStats(
        original_left=int(sv_left.mask.flags.sum()),
        original_right=int(sv_right.mask.flags.sum()),
        placed_left=wstats_l.placed,
        placed_right=wstats_r.placed,
        dropped_left=wstats_l.dropped,
        dropped_right=wstats_r.dropped,
        collisions_left=wstats_l.overwritten,
        collisions_right=wstats_r.overwritten,
        merged_density_left=merged_left.mask.density(),
        merged_density_right=merged_right.mask.density(),
        times=times,
    )
    if stats.original_left * 4 != n_pixels or stats.original_right * 4 != n_pixels:
        raise InvariantError("sampling density is not exactly one quarter")
    for ws in (wstats_l, wstats_r):
        if ws.placed + ws.dropped + ws.overwritten != ws.sources:
            raise InvariantError("warp bookkeeping does not balance")
    return StereoResult(
        final_left,
        final_right,
        first_left,
        first_right,
        disp_left,
        disp_right,
        merged_left,
        merged_right,
        stats,
    )


def _scene_dirs(dataset_dir):
    root = Path(dataset_dir)
    if not root.is_dir():
        raise MissingFileError(root, "dataset directory not found")
    return sorted(p for p in root.iterdir() if p.is_dir())


def _find_view(scene_dir, name):
    for ext in (".png", ".pgm"):
        p = scene_dir / f"{name}{ext}"
        if p.exists():
            return p
    raise MissingFileError(scene_dir, f"view {name!r} not found in scene")


def _evaluate_scene(scene_dir, cfg, pairs, save_outputs):
    """All report entries of one scene. Raises NrstereoError on bad input."""
    needed = sorted({v for pair in pairs for v in pair})
    hr = {name: load_image(_find_view(scene_dir, name)) for name in needed}
    sv_cache = {}
    baseline_cache = {}

    def prepared(name, seed):
        key = (name, seed)
        if key not in sv_cache:
            view = _sample(hr[name], seed)
            sv_cache[key] = (view, _first_pass(view, cfg))
        return sv_cache[key]

    def baseline(name, seed):
        key = (name, seed)
        if key not in baseline_cache:
            view, first = prepared(name, seed)
            if cfg.first_pass == "fse":
                baseline_cache[key] = first
            else:
                baseline_cache[key] = reconstruct_any(view, cfg.fse)
        return baseline_cache[key]

    entries = []
    for left_name, right_name in pairs:
        sv_l, first_l = prepared(left_name, cfg.mask_seed_left)
        sv_r, first_r = prepared(right_name, cfg.mask_seed_right)
        result = run_stereo(
            hr[left_name],
            hr[right_name],
            cfg,
            _prepared=(sv_l, first_l, sv_r, first_r),
        )
        mm = pairing_distance_mm(left_name, right_name, cfg.distance_mm_per_step)
        sides = []
        if cfg.eval_views in ("left", "both"):
            sides.append(
                (left_name, cfg.mask_seed_left, result.final_left, hr[left_name])
            )
        if cfg.eval_views in ("right", "both"):
            sides.append(
                (right_name, cfg.mask_seed_right, result.final_right, hr[right_name])
            )
        for view_name, seed, final, truth in sides:
            sv = baseline(view_name, seed)
            entries.append(
                QualityEntry(
                    name=scene_dir.name,
                    view=view_name,
                    sensor_distance_mm=mm,
                    psnr_sv=psnr(truth, sv),
                    psnr_prop=psnr(truth, final),
                    ssim_sv=ssim(truth, sv),
                    ssim_prop=ssim(truth, final),
                )
            )
        if save_outputs:
            out = Path(cfg.output_dir) / scene_dir.name / f"{left_name}-{right_name}"
            out.mkdir(parents=True, exist_ok=True)
            save_image(baseline(left_name, cfg.mask_seed_left), out / f"sv_{left_name}.png")
            save_image(baseline(right_name, cfg.mask_seed_right), out / f"sv_{right_name}.png")
            save_image(result.final_left, out / f"stereo_{left_name}.png")
            save_image(result.final_right, out / f"stereo_{right_name}.png")
            save_image(disparity_to_image(result.disp_left), out / f"disparity_{left_name}.png")
            save_image(disparity_to_image(result.disp_right), out / f"disparity_{right_name}.png")
            save_image(classes_to_image(result.merged_left), out / f"classes_{left_name}.png")
            save_image(classes_to_image(result.merged_right), out / f"classes_{right_name}.png")
    return entries


def run_batch(dataset_dir, cfg=None, save_outputs=True):
    """Evaluate every scene directory against every configured pairing.

    Scene directories are processed in name order; unreadable scenes are
    skipped with a warning on stderr and listed in the report. Results do
    not depend on the worker count.
    """
    if cfg is None:
        cfg = PipelineConfig()
    pairs = parse_pairings(cfg.pairings)
    scenes = _scene_dirs(dataset_dir)
    if not scenes:
        raise InputError(f"no scene directories under {dataset_dir}")

    def work(scene_dir):
        try:
            return _evaluate_scene(scene_dir, cfg, pairs, save_outputs), None
        except NrstereoError as e:
            return None, f"{scene_dir.name}: {e}"

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(work, scenes))
    else:
        outcomes = [work(s) for s in scenes]

    entries = []
    skipped = []
    for scene_dir, (scene_entries, err) in zip(scenes, outcomes):
        if err is not None:
            print(f"warning: skipping scene {err}", file=sys.stderr)
            skipped.append(scene_dir.name)
        else:
            entries.extend(scene_entries)
    return build_report(entries, skipped)


def save_config(cfg, path):
    """Write the configuration as an INI file with one section per module."""
    parser = configparser.ConfigParser()
    parser["fse"] = {
        "block_size": str(cfg.fse.block_size),
        "area_size": str(cfg.fse.area_size),
        "fft_size": str(cfg.fse.fft_size),
        "iterations": str(cfg.fse.iterations),
        "spatial_decay": repr(cfg.fse.spatial_decay),
        "recon_weight": repr(cfg.fse.recon_weight),
        "odc_factor": repr(cfg.fse.odc_factor),
        "freq_weight_decay": repr(cfg.fse.freq_weight_decay),
    }
    parser["match"] = {
        "window_radius": str(cfg.match.window_radius),
        "dx_min": str(cfg.match.dx_min),
        "dx_max": str(cfg.match.dx_max),
        "dy_min": str(cfg.match.dy_min),
        "dy_max": str(cfg.match.dy_max),
        "cc_tolerance": str(cfg.match.cc_tolerance),
    }
    parser["pipeline"] = {
        "mask_seed_left": str(cfg.mask_seed_left),
        "mask_seed_right": str(cfg.mask_seed_right),
        "first_pass": cfg.first_pass,
        "warped_support_weight": repr(cfg.warped_support_weight),
        "output_dir": cfg.output_dir,
        "pairings": cfg.pairings,
        "eval_views": cfg.eval_views,
        "workers": str(cfg.workers),
        "distance_mm_per_step": str(cfg.distance_mm_per_step),
    }
    with open(path, "w") as fh:
        parser.write(fh)


def load_config(path):
    """Read an INI configuration; missing keys keep their defaults."""
    parser = configparser.ConfigParser()
    if not Path(path).exists():
        raise MissingFileError(path, "config file not found")
    try:
        parser.read(path)
    except configparser.Error as e:
        raise InputError(f"bad config file {path}: {e}") from None
    try:
        fse_kw = {}
        if parser.has_section("fse"):
            s = parser["fse"]
            for key in ("block_size", "area_size", "fft_size", "iterations"):
                if key in s:
                    fse_kw[key] = s.getint(key)
            for key in ("spatial_decay", "recon_weight", "odc_factor", "freq_weight_decay"):
                if key in s:
                    fse_kw[key] = s.getfloat(key)
        match_kw = {}
        if parser.has_section("match"):
            s = parser["match"]
            for key in ("window_radius", "dx_min", "dx_max", "dy_min", "dy_max", "cc_tolerance"):
                if key in s:
                    match_kw[key] = s.getint(key)
        pipe_kw = {}
        if parser.has_section("pipeline"):
            s = parser["pipeline"]
            for key in ("mask_seed_left", "mask_seed_right", "workers", "distance_mm_per_step"):
                if key in s:
                    pipe_kw[key] = s.getint(key)
            if "warped_support_weight" in s:
                pipe_kw["warped_support_weight"] = s.getfloat("warped_support_weight")
            for key in ("first_pass", "output_dir", "pairings", "eval_views"):
                if key in s:
                    pipe_kw[key] = s.get(key)
    except ValueError as e:
        raise InputError(f"bad config value in {path}: {e}") from None
    return PipelineConfig(fse=FseParams(**fse_kw), match=MatchParams(**match_kw), **pipe_kw)
