"""Pipeline orchestration tests: config files, stereo chain, batch runs."""

import numpy as np
import pytest

from nrstereo.errors import InputError, MissingFileError
from nrstereo.fse import FseParams
from nrstereo.pipeline import (
    DEFAULT_PAIRINGS,
    PipelineConfig,
    load_config,
    pairing_distance_mm,
    parse_pairings,
    run_batch,
    run_single_view,
    run_stereo,
    save_config,
)
from nrstereo.sampling import apply_mask, generate_mask
from nrstereo.stereo import (
    MatchParams,
    compute_disparity,
    consistency_check,
    merge_views,
    warp_samples,
)
from nrstereo.synth import SceneSpec, shifted_pair, write_dataset


def small_cfg(**kw):
    """Default knobs on small inputs; full-size experiment knobs unchanged."""
    return PipelineConfig(**kw)


def test_parse_pairings():
    assert parse_pairings("view1:view2") == [("view1", "view2")]
    assert parse_pairings(" a:b , c:d ,") == [("a", "b"), ("c", "d")]
    assert len(parse_pairings(DEFAULT_PAIRINGS)) == 4
    for bad in ("", "view1", "view1:", ":view2", "a:b:c"):
        with pytest.raises(InputError):
            parse_pairings(bad)


def test_pairing_distance_mm():
    assert pairing_distance_mm("view1", "view2", 40) == 40
    assert pairing_distance_mm("view1", "view5", 40) == 160
    assert pairing_distance_mm("view5", "view1", 40) == 160
    assert pairing_distance_mm("left", "right", 40) == 0


def test_pipeline_config_validation():
    with pytest.raises(InputError):
        PipelineConfig(first_pass="cubic")
    with pytest.raises(InputError):
        PipelineConfig(eval_views="top")
    with pytest.raises(InputError):
        PipelineConfig(warped_support_weight=0.0)
    with pytest.raises(InputError):
        PipelineConfig(warped_support_weight=1.5)
    with pytest.raises(InputError):
        PipelineConfig(workers=0)
    with pytest.raises(InputError):
        PipelineConfig(pairings="nonsense")


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(
        fse=FseParams(block_size=2, area_size=14, fft_size=16, iterations=7,
                      spatial_decay=0.8),
        match=MatchParams(window_radius=2, dx_min=-10, dx_max=0, cc_tolerance=1),
        mask_seed_left=3,
        mask_seed_right=4,
        first_pass="linear",
        warped_support_weight=0.25,
        output_dir="elsewhere",
        pairings="view1:view3",
        eval_views="left",
        workers=2,
        distance_mm_per_step=25,
    )
    path = tmp_path / "run.ini"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_config_missing_keys_keep_defaults(tmp_path):
    path = tmp_path / "partial.ini"
    path.write_text("[pipeline]\nfirst_pass = linear\n\n[fse]\niterations = 5\n")
    cfg = load_config(path)
    assert cfg.first_pass == "linear"
    assert cfg.fse.iterations == 5
    assert cfg.fse.block_size == 4
    assert cfg.match == MatchParams()
    assert cfg.pairings == DEFAULT_PAIRINGS


def test_config_errors(tmp_path):
    with pytest.raises(MissingFileError):
        load_config(tmp_path / "absent.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("[fse]\niterations = many\n")
    with pytest.raises(InputError):
        load_config(bad)
    invalid = tmp_path / "invalid.ini"
    invalid.write_text("[pipeline]\nfirst_pass = cubic\n")
    with pytest.raises(InputError):
        load_config(invalid)


def test_negative_cc_tolerance_collapses_to_single_view():
    # a tolerance below zero rejects every match, so no sample crosses the
    # views and the stereo result must equal the single-view baseline
    left, right = shifted_pair(width=96, height=64, seed=2, shift=5)
    cfg = small_cfg(match=MatchParams(cc_tolerance=-1))
    res = run_stereo(left, right, cfg)
    assert not res.disp_left.valid.any()
    assert res.stats.placed_left == 0 and res.stats.placed_right == 0
    assert res.stats.merged_density_left == 0.25
    assert np.array_equal(res.final_left.samples, res.first_left.samples)
    sv = run_single_view(left, cfg.mask_seed_left, cfg)
    assert np.array_equal(res.final_left.samples, sv.samples)


def test_identical_views_disjoint_seeds_density():
    # identical views with a zero-inclusive search range match at zero
    # everywhere in the interior; merging two independent masks then covers
    # 1/4 + 3/4 * 1/4 = 43.75% of the pixels, minus a small border ring
    rng = np.random.default_rng(8)
    from scipy.ndimage import gaussian_filter

    from nrstereo.raster import RasterImage

    img = RasterImage(np.floor(gaussian_filter(rng.uniform(0, 255, (256, 256)), 1.5)))
    sv1 = apply_mask(img, generate_mask(128, 128, seed=1))
    sv2 = apply_mask(img, generate_mask(128, 128, seed=2))
    params = MatchParams()
    fwd = compute_disparity(img, img, params.mirrored())
    assert np.all(fwd.dx[fwd.valid] == 0) and np.all(fwd.dy[fwd.valid] == 0)
    disp = consistency_check(fwd, fwd, params.cc_tolerance)
    warped, _ = warp_samples(sv2, disp)
    merged = merge_views(sv1, warped)
    assert abs(merged.mask.density() - 0.4375) < 0.015


def test_run_stereo_stats_and_shapes():
    left, right = shifted_pair(width=96, height=64, seed=5, shift=5)
    res = run_stereo(left, right, small_cfg())
    st = res.stats
    n = 96 * 64
    assert st.original_left * 4 == n and st.original_right * 4 == n
    assert st.placed_left > 0
    upper = (st.original_left + st.placed_left) / n
    assert 0.25 < st.merged_density_left <= upper + 1e-12
    assert set(st.times) == {"first_pass", "matching", "warp_merge", "final_pass"}
    assert all(v >= 0 for v in st.times.values())
    assert res.final_left.shape == left.shape
    assert np.isfinite(res.final_left.samples).all()
    text = st.as_text()
    assert "placed_left" in text and "times" not in text


def test_run_stereo_rejects_shape_mismatch():
    left, _ = shifted_pair(width=64, height=48, seed=1)
    _, right = shifted_pair(width=96, height=64, seed=1)
    with pytest.raises(InputError):
        run_stereo(left, right, small_cfg())


def tiny_dataset(tmp_path, names=("alpha", "beta")):
    specs = [
        SceneSpec(name, width=64, height=48, seed=20 + i, n_objects=1,
                  max_disparity=8)
        for i, name in enumerate(names)
    ]
    write_dataset(tmp_path, specs, n_views=2)
    return tmp_path


def test_run_batch_rows_and_order(tmp_path):
    root = tiny_dataset(tmp_path / "data", names=("beta", "alpha"))
    cfg = small_cfg(pairings="view1:view2", output_dir=str(tmp_path / "out"))
    report = run_batch(root, cfg, save_outputs=True)
    # both views of each pairing, scenes in name order
    assert [(e.name, e.view) for e in report.entries] == [
        ("alpha", "view1"),
        ("alpha", "view2"),
        ("beta", "view1"),
        ("beta", "view2"),
    ]
    assert all(e.sensor_distance_mm == 40 for e in report.entries)
    assert report.skipped == ()
    saved = sorted(p.name for p in (tmp_path / "out" / "alpha" / "view1-view2").iterdir())
    assert len(saved) == 8 and "stereo_view1.png" in saved


def test_run_batch_skips_unreadable_scene(tmp_path, capsys):
    root = tiny_dataset(tmp_path / "data")
    broken = root / "broken"
    broken.mkdir()
    (broken / "view1.png").write_bytes(b"not an image")
    cfg = small_cfg(pairings="view1:view2")
    report = run_batch(root, cfg, save_outputs=False)
    assert report.skipped == ("broken",)
    assert {e.name for e in report.entries} == {"alpha", "beta"}
    assert "broken" in capsys.readouterr().err
    assert "Skipped scenes: broken" in report.to_markdown()


def test_run_batch_eval_views_left(tmp_path):
    root = tiny_dataset(tmp_path / "data", names=("alpha",))
    cfg = small_cfg(pairings="view1:view2", eval_views="left")
    report = run_batch(root, cfg, save_outputs=False)
    assert [(e.name, e.view) for e in report.entries] == [("alpha", "view1")]


def test_run_batch_worker_count_does_not_change_results(tmp_path):
    root = tiny_dataset(tmp_path / "data")
    cfg1 = small_cfg(pairings="view1:view2", workers=1)
    cfg2 = small_cfg(pairings="view1:view2", workers=3)
    r1 = run_batch(root, cfg1, save_outputs=False)
    r2 = run_batch(root, cfg2, save_outputs=False)
    p1 = tmp_path / "r1.csv"
    p2 = tmp_path / "r2.csv"
    r1.to_csv(p1)
    r2.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_run_batch_missing_dataset(tmp_path):
    with pytest.raises(MissingFileError):
        run_batch(tmp_path / "nowhere", small_cfg())
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(InputError):
        run_batch(empty, small_cfg())
