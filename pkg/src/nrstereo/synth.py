"""Synthetic rectified stereo scenes with exact pixel correspondence.

A scene is a stack of fronto-parallel layers over a shared canvas. Every
layer has a constant integer disparity per 40 mm of camera baseline; a
world point at left-view column u appears in the view with baseline scale
s at column u - d * s. Views are rendered by depth-ordered compositing, so
occlusions behave like in a real camera row and every visible world point
is bitwise identical across views.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import InputError
from .raster import RasterImage

TEXTURE_KINDS = ("granular", "fabric", "print", "gradient")


def _texture(kind, shape, rng):
    """Integer-valued texture patch in [0, 255]."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if kind == "granular":
        base = gaussian_filter(rng.uniform(0, 255, shape), 1.9)
        lo = gaussian_filter(rng.uniform(0, 255, shape), 8.0)
        img = 0.5 * base + 0.5 * lo
    elif kind == "fabric":
        f1 = rng.uniform(0.15, 0.45)
        f2 = rng.uniform(0.1, 0.3)
        phase = rng.uniform(0, 2 * np.pi, 4)
        img = (
            128
            + 48 * np.sin(f1 * xx + phase[0]) * np.cos(f2 * yy + phase[1])
            + 24 * np.sin(0.7 * f2 * (xx + yy) + phase[2])
            + gaussian_filter(rng.normal(0, 12, shape), 1.2)
        )
    elif kind == "print":
        blobs = gaussian_filter(rng.uniform(0, 1, shape), 3.0)
        ink = gaussian_filter((blobs > np.quantile(blobs, 0.55)).astype(float), 1.0)
        img = 190.0 - 120.0 * ink + gaussian_filter(rng.normal(0, 8, shape), 1.2)
    elif kind == "gradient":
        ang = rng.uniform(0, 2 * np.pi)
        ramp = np.cos(ang) * xx / max(w, 1) + np.sin(ang) * yy / max(h, 1)
        img = 90 + 110 * (ramp - ramp.min()) / max(np.ptp(ramp), 1e-9)
        img = img + 18 * np.sin(0.35 * xx + 0.2 * yy) + gaussian_filter(
            rng.normal(0, 6, shape), 1.5
        )
    else:
        raise InputError(f"unknown texture kind {kind!r}")
    lo, hi = img.min(), img.max()
    img = 8 + (img - lo) / max(hi - lo, 1e-9) * 239
    return np.floor(img + 0.5)


@dataclass(frozen=True)
class Layer:
    """One fronto-parallel plane: texture and opacity over the canvas."""

    texture: np.ndarray
    opacity: np.ndarray
    disparity: int


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a reproducible layered scene."""

    name: str
    width: int = 400
    height: int = 348
    seed: int = 0
    n_objects: int = 3
    background_disparity: int = 2
    max_disparity: int = 14
    max_scale: int = 4

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise InputError(f"scene too small: {self.width}x{self.height}")
        if not (0 <= self.background_disparity <= self.max_disparity):
            raise InputError("need 0 <= background_disparity <= max_disparity")
        if self.n_objects < 0:
            raise InputError("n_objects must be >= 0")


def build_layers(spec):
    """Construct the canvas layers of a scene, background first."""
    rng = np.random.default_rng(spec.seed)
    canvas_w = spec.width + spec.max_disparity * spec.max_scale
    shape = (spec.height, canvas_w)
    kinds = list(TEXTURE_KINDS)
    bg_kind = kinds[rng.integers(0, len(kinds))]
    layers = [
        Layer(
            _texture(bg_kind, shape, rng),
            np.ones(shape, bool),
            spec.background_disparity,
        )
    ]
    if spec.n_objects == 0:
        return layers
    disps = np.sort(
        rng.choice(
            np.arange(spec.background_disparity + 2, spec.max_disparity + 1),
            size=min(spec.n_objects, spec.max_disparity - spec.background_disparity - 1),
            replace=False,
        )
    )
    yy, xx = np.mgrid[0:spec.height, 0:canvas_w].astype(np.float64)
    for d in disps:
        kind = kinds[rng.integers(0, len(kinds))]
        tex = _texture(kind, shape, rng)
        cy = rng.uniform(0.25, 0.75) * spec.height
        cx = rng.uniform(0.25, 0.75) * spec.width
        ry = rng.uniform(0.12, 0.3) * spec.height
        rx = rng.uniform(0.12, 0.3) * spec.width
        if rng.random() < 0.5:
            opacity = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        else:
            opacity = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        layers.append(Layer(tex, opacity, int(d)))
    return layers


def render_view(layers, width, scale):
    """Compose the view at the given baseline scale (0 = left reference)."""
    height = layers[0].texture.shape[0]
    canvas_w = layers[0].texture.shape[1]
    out = np.zeros((height, width))
    filled = np.zeros((height, width), bool)
    cols = np.arange(width)
    for layer in sorted(layers, key=lambda l: -l.disparity):
        u = cols + layer.disparity * scale
        if u[-1] >= canvas_w:
            raise InputError("canvas too narrow for requested scale")
        vis = layer.opacity[:, u] & ~filled
        out[vis] = layer.texture[:, u][vis]
        filled |= vis
    return RasterImage(out)


def render_scene(spec, n_views=5):
    """All views of a scene: view1 is the left reference of every pair.

    view k (k >= 2) is the right view of a pair with baseline scale k - 1,
    40 mm per step.
    """
    if not (2 <= n_views <= spec.max_scale + 1):
        raise InputError(f"n_views must be in [2, {spec.max_scale + 1}]")
    layers = build_layers(spec)
    views = {"view1": render_view(layers, spec.width, 0)}
    for k in range(2, n_views + 1):
        views[f"view{k}"] = render_view(layers, spec.width, k - 1)
    return views


def shifted_pair(width=128, height=96, seed=0, shift=5, kind="fabric"):
    """A texture plane seen by two cameras: right is an exact column shift."""
    spec = SceneSpec(
        "shifted",
        width,
        height,
        seed,
        n_objects=0,
        background_disparity=shift,
        max_disparity=max(shift, 1),
        max_scale=1,
    )
    rng = np.random.default_rng(seed)
    canvas = _texture(kind, (height, width + shift), rng)
    layers = [Layer(canvas, np.ones(canvas.shape, bool), shift)]
    left = render_view(layers, width, 0)
    right = render_view(layers, width, 1)
    return left, right


def occlusion_pair(width=160, height=120, seed=1):
    """Background plus one foreground slab, for occlusion behaviour tests."""
    spec = SceneSpec(
        "occ", width, height, seed, n_objects=1, max_disparity=10, max_scale=1
    )
    layers = build_layers(spec)
    return render_view(layers, width, 0), render_view(layers, width, 1)


def acceptance_scenes():
    """The three stock scenes used by the experiment reproduction."""
    return [
        SceneSpec("bricks", seed=101, n_objects=3),
        SceneSpec("parcels", seed=202, n_objects=4),
        SceneSpec("meadow", seed=303, n_objects=2),
    ]


def write_dataset(root, specs=None, n_views=5):
    """Render scenes to <root>/<scene>/view<k>.png; returns written paths."""
    from pathlib import Path

    from .raster import save_image

    if specs is None:
        specs = acceptance_scenes()
    root = Path(root)
    written = []
    for spec in specs:
        d = root / spec.name
        d.mkdir(parents=True, exist_ok=True)
        for name, img in render_scene(spec, n_views).items():
            p = d / f"{name}.png"
            save_image(img, p)
            written.append(p)
    return written
