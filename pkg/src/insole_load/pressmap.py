"""Thermal-map rendering of 36-channel differential vectors.

A sample becomes a 224x224 RGB image: channel values are spread over each
foot outline by inverse-distance-weighted interpolation, smoothed, cropped
to the feet, and colour-mapped on a fixed population scale (mean +/- two
standard deviations of the training differentials) running deep blue to
deep red. Rendering is a pure function: identical inputs give identical
bytes, and a value's position on the gradient is strictly monotone in the
value, so images are comparable across samples and subjects.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, map_coordinates

from .core import CHANNEL_COUNT, CHANNELS_PER_FOOT, InputError


class DegenerateScale(InputError):
    pass


class LayoutError(InputError):
    pass


@dataclass(frozen=True)
class FootLayout:
    """Channel centroids and outline for one foot, in a normalised frame
    (x across the foot, y from toes to heel, both in [0, 1])."""

    centroids: np.ndarray  # (18, 2)
    outline: np.ndarray  # (k, 2) closed polygon, last edge implicit

    def __post_init__(self):
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=np.float64))
        object.__setattr__(self, "outline", np.asarray(self.outline, dtype=np.float64))


@dataclass(frozen=True)
class SensorLayout:
    left: FootLayout
    right: FootLayout

    def validate(self) -> None:
        for name, foot in (("left", self.left), ("right", self.right)):
            if foot.centroids.shape != (CHANNELS_PER_FOOT, 2):
                raise LayoutError(f"{name} foot needs {CHANNELS_PER_FOOT} centroids")
            inside = points_in_polygon(foot.centroids, foot.outline)
            if not inside.all():
                bad = np.nonzero(~inside)[0].tolist()
                raise LayoutError(f"{name} foot centroids outside outline: {bad}")

    @classmethod
    def load(cls, path) -> "SensorLayout":
        with Path(path).open() as fh:
            raw = json.load(fh)
        feet = {}
        for entry in raw:
            channels = sorted(entry["channels"], key=lambda c: c["index"])
            cents = np.array([[c["x"], c["y"]] for c in channels])
            feet[entry["foot"]] = FootLayout(cents, np.array(entry["outline"]))
        if set(feet) != {"left", "right"}:
            raise LayoutError(f"layout file must define a left and a right foot, got {sorted(feet)}")
        layout = cls(left=feet["left"], right=feet["right"])
        layout.validate()
        return layout

    def save(self, path) -> None:
        doc = []
        for name, foot, base in (("left", self.left, 0), ("right", self.right, CHANNELS_PER_FOOT)):
            doc.append(
                {
                    "foot": name,
                    "channels": [
                        {"index": base + i, "x": float(x), "y": float(y)}
                        for i, (x, y) in enumerate(foot.centroids)
                    ],
                    "outline": [[float(x), float(y)] for x, y in foot.outline],
                }
            )
        Path(path).write_text(json.dumps(doc, indent=2))


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd ray casting; boundary points follow the half-open edge rule."""
    pts = np.atleast_2d(points)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < np.where(crosses, x_at, np.inf))
    return inside


# Left-foot outline, toes at the top. The right foot is mirrored in x.
_LEFT_OUTLINE = np.array(
    [
        [0.32, 0.02], [0.55, 0.01], [0.74, 0.05], [0.84, 0.13], [0.86, 0.24],
        [0.82, 0.36], [0.76, 0.48], [0.72, 0.60], [0.72, 0.72], [0.76, 0.84],
        [0.70, 0.94], [0.55, 0.99], [0.40, 0.97], [0.30, 0.88], [0.28, 0.74],
        [0.30, 0.58], [0.28, 0.40], [0.24, 0.24], [0.24, 0.10],
    ]
)

# 18 channel centroids per foot: 3 toe, 5 metatarsal, 4 arch, 6 heel.
_LEFT_CENTROIDS = np.array(
    [
        [0.42, 0.08], [0.58, 0.09], [0.72, 0.13],
        [0.34, 0.22], [0.46, 0.20], [0.58, 0.21], [0.69, 0.24], [0.77, 0.28],
        [0.38, 0.38], [0.52, 0.40], [0.64, 0.42], [0.50, 0.55],
        [0.42, 0.70], [0.56, 0.72], [0.64, 0.78], [0.40, 0.82], [0.52, 0.86], [0.60, 0.90],
    ]
)


def default_layout() -> SensorLayout:
    """Built-in plantar arrangement; override with a layout file as needed."""
    mirror = np.array([-1.0, 1.0])
    offset = np.array([1.0, 0.0])
    right = FootLayout(_LEFT_CENTROIDS * mirror + offset, _LEFT_OUTLINE * mirror + offset)
    layout = SensorLayout(left=FootLayout(_LEFT_CENTROIDS, _LEFT_OUTLINE), right=right)
    layout.validate()
    return layout


@dataclass(frozen=True)
class ColorScale:
    """Affine, clipped mapping from differential value to gradient position."""

    v_min: float
    v_max: float

    def position(self, value) -> np.ndarray:
        t = (np.asarray(value, dtype=np.float64) - self.v_min) / (self.v_max - self.v_min)
        return np.clip(t, 0.0, 1.0)


def fit_color_scale(training_values) -> ColorScale:
    """Population scale mu +/- 2 sigma over all training channel values."""
    vals = np.asarray(training_values, dtype=np.float64).ravel()
    if vals.size < 2:
        raise DegenerateScale("need at least two values to fit a colour scale")
    mu = float(vals.mean())
    sigma = float(vals.std())  # population formula
    if sigma == 0.0:
        raise DegenerateScale("all training values are identical; scale is degenerate")
    return ColorScale(v_min=mu - 2.0 * sigma, v_max=mu + 2.0 * sigma)


# Gradient control points from deep blue through cyan/yellow to deep red.
_GRADIENT = np.array(
    [
        [0.00, 0, 0, 139],
        [0.15, 0, 0, 255],
        [0.35, 0, 200, 255],
        [0.50, 80, 255, 120],
        [0.65, 255, 230, 0],
        [0.85, 255, 60, 0],
        [1.00, 139, 0, 0],
    ]
)


def gradient_rgb(t) -> np.ndarray:
    """Colour at gradient position t in [0, 1], as uint8 RGB."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    stops = _GRADIENT[:, 0]
    out = np.empty(t.shape + (3,), dtype=np.uint8)
    for c in range(3):
        out[..., c] = np.rint(np.interp(t, stops, _GRADIENT[:, c + 1])).astype(np.uint8)
    return out


BACKGROUND_RGB = (255, 255, 255)


def _foot_canvas_transform(side: str) -> tuple[np.ndarray, np.ndarray]:
    # Feet render side by side on a unit canvas: left foot on the left half.
    if side == "left":
        return np.array([0.46, 0.96]), np.array([0.02, 0.02])
    return np.array([0.46, 0.96]), np.array([0.52, 0.02])


def interpolate_map(features, layout: SensorLayout, grid_size: int = 224) -> np.ndarray:
    """Inverse-distance-weighted (power 2) field on a grid_size^2 canvas.

    Cells outside both foot outlines are NaN; a cell that lands exactly on
    a channel centroid takes that channel's value.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (CHANNEL_COUNT,):
        raise InputError(f"expected {CHANNEL_COUNT} features, got shape {feats.shape}")
    xs = (np.arange(grid_size) + 0.5) / grid_size
    gx, gy = np.meshgrid(xs, xs)
    field = np.full((grid_size, grid_size), np.nan)
    for side, base in (("left", 0), ("right", CHANNELS_PER_FOOT)):
        foot: FootLayout = getattr(layout, side)
        scale, offset = _foot_canvas_transform(side)
        cents = foot.centroids * scale + offset
        outline = foot.outline * scale + offset
        vals = feats[base : base + CHANNELS_PER_FOOT]

        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        mask = points_in_polygon(pts, outline).reshape(grid_size, grid_size)
        if not mask.any():
            continue
        px = gx[mask]
        py = gy[mask]
        d2 = (px[:, None] - cents[None, :, 0]) ** 2 + (py[:, None] - cents[None, :, 1]) ** 2
        exact = d2 < 1e-24
        with np.errstate(divide="ignore"):
            w = 1.0 / d2
        w[exact.any(axis=1)] = 0.0
        w[exact] = 1.0
        cell_vals = (w @ vals) / w.sum(axis=1)
        field[mask] = cell_vals
    return field


def render(
    field: np.ndarray,
    scale: ColorScale,
    smoothing_sigma_px: float = 3.0,
    out_size: int = 224,
    margin: float = 0.05,
) -> np.ndarray:
    """Smooth, crop to the feet with a margin, resize, colour-map.

    Returns an (out_size, out_size, 3) uint8 array; encode with write_png.
    """
    field = np.asarray(field, dtype=np.float64)
    mask = np.isfinite(field)
    if not mask.any():
        raise InputError("field has no in-outline cells to render")
    if smoothing_sigma_px > 0.0:
        # Normalised convolution keeps the smoothing from bleeding the
        # background sentinel into the feet.
        filled = np.where(mask, field, 0.0)
        num = gaussian_filter(filled, smoothing_sigma_px)
        den = gaussian_filter(mask.astype(np.float64), smoothing_sigma_px)
        with np.errstate(invalid="ignore"):
            smoothed = np.where(mask, num / np.maximum(den, 1e-12), np.nan)
    else:
        smoothed = np.where(mask, field, np.nan)

    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    r0, r1 = rows[0], rows[-1]
    c0, c1 = cols[0], cols[-1]
    pad_r = margin * (r1 - r0 + 1)
    pad_c = margin * (c1 - c0 + 1)
    r0 = max(0.0, r0 - pad_r)
    r1 = min(field.shape[0] - 1.0, r1 + pad_r)
    c0 = max(0.0, c0 - pad_c)
    c1 = min(field.shape[1] - 1.0, c1 + pad_c)

    out_rows = np.linspace(r0, r1, out_size)
    out_cols = np.linspace(c0, c1, out_size)
    rr, cc = np.meshgrid(out_rows, out_cols, indexing="ij")
    coords = np.stack([rr.ravel(), cc.ravel()])
    num = map_coordinates(
        np.where(mask, smoothed, 0.0), coords, order=1, mode="nearest"
    ).reshape(out_size, out_size)
    den = map_coordinates(mask.astype(np.float64), coords, order=1, mode="nearest").reshape(
        out_size, out_size
    )
    # Dividing by the resampled mask keeps edge pixels from being diluted
    # by the background during the bilinear resize.
    mask_resized = den > 0.5
    resized = np.where(mask_resized, num / np.maximum(den, 1e-12), 0.0)

    rgb = gradient_rgb(scale.position(resized))
    rgb[~mask_resized] = BACKGROUND_RGB
    return rgb


def write_png(rgb: np.ndarray, path) -> None:
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def png_bytes(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def render_sample(
    features,
    scale: ColorScale,
    layout: SensorLayout | None = None,
    grid_size: int = 224,
    smoothing_sigma_px: float = 3.0,
    out_size: int = 224,
) -> np.ndarray:
    """Feature vector to RGB image in one call."""
    layout = layout or default_layout()
    field = interpolate_map(features, layout, grid_size)
    return render(field, scale, smoothing_sigma_px, out_size)
