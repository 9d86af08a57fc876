"""Data model and I/O for 4D light fields, masks, and scalar maps.

A light field is stored as a stack of same-sized 8-bit luminance images,
one per viewpoint of a calibrated camera grid.  Viewpoint coordinates
``(s, t)`` are signed offsets in baseline units with the reference view at
``(0, 0)``.  Directories follow a small manifest format, see
:func:`load_lightfield`.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class LightFieldError(Exception):
    """Base class for light-field data errors."""


class ManifestError(LightFieldError):
    """Manifest file missing, unreadable, or malformed."""


class MissingViewError(LightFieldError):
    def __init__(self, s: float, t: float, filename: str = ""):
        msg = f"view ({s:g}, {t:g}) declared in manifest but image is missing"
        if filename:
            msg += f" ({filename})"
        super().__init__(msg)
        self.s = s
        self.t = t


class DuplicateViewpointError(LightFieldError):
    def __init__(self, s: float, t: float):
        super().__init__(f"viewpoint ({s:g}, {t:g}) declared more than once")
        self.s = s
        self.t = t


class SizeMismatchError(LightFieldError):
    pass


class Viewpoint(NamedTuple):
    """Signed grid coordinate of one camera, in baseline units."""

    s: float
    t: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True)
class LightField:
    """A grid of viewpoint images plus their coordinates.

    ``views`` is an ``(M, H, W)`` uint8 luminance stack aligned with
    ``viewpoints`` (``(M, 2)`` float, columns s then t).  ``grid_rows`` and
    ``grid_cols`` describe the declared camera grid; a complete field has
    ``M == grid_rows * grid_cols``, a viewpoint subset keeps the original
    grid dimensions but fewer views.
    """

    grid_rows: int
    grid_cols: int
    views: np.ndarray
    viewpoints: np.ndarray
    center_index: int

    def __post_init__(self):
        views = np.asarray(self.views)
        vps = np.asarray(self.viewpoints, dtype=float)
        if views.ndim != 3 or views.dtype != np.uint8:
            raise ValueError("views must be an (M, H, W) uint8 array")
        if vps.shape != (views.shape[0], 2):
            raise ValueError("viewpoints must align with views")
        centers = np.flatnonzero((vps[:, 0] == 0.0) & (vps[:, 1] == 0.0))
        if len(centers) != 1 or centers[0] != self.center_index:
            raise ValueError("exactly one viewpoint must be (0, 0) at center_index")
        uniq = {(float(s), float(t)) for s, t in vps}
        if len(uniq) != len(vps):
            raise ValueError("viewpoint coordinates must be unique")
        object.__setattr__(self, "views", _freeze(views))
        object.__setattr__(self, "viewpoints", _freeze(vps))

    @property
    def num_views(self) -> int:
        return self.views.shape[0]

    @property
    def height(self) -> int:
        return self.views.shape[1]

    @property
    def width(self) -> int:
        return self.views.shape[2]

    @property
    def is_complete(self) -> bool:
        return self.num_views == self.grid_rows * self.grid_cols

    @property
    def center_view(self) -> np.ndarray:
        return self.views[self.center_index]

    def viewpoint(self, index: int) -> Viewpoint:
        s, t = self.viewpoints[index]
        return Viewpoint(float(s), float(t))


@dataclasses.dataclass(frozen=True)
class ScalarMap:
    """W x H map of nonnegative finite reals (e.g. a linearity map)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("scalar map must be 2-D")
        if not np.all(np.isfinite(data)):
            raise ValueError("scalar map values must be finite")
        if np.any(data < 0):
            raise ValueError("scalar map values must be nonnegative")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclasses.dataclass(frozen=True)
class Mask:
    """Binary W x H labeling; 1 marks foreground (or usable) pixels."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError("mask must be 2-D")
        data = data.astype(np.uint8, copy=True)
        if not np.isin(data, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def to_luminance(img: np.ndarray) -> np.ndarray:
    """Convert an (H, W) or (H, W, 3+) 8-bit image to rounded luma."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        return arr.astype(np.uint8)
    r, g, b = LUMA_WEIGHTS
    luma = r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]
    return np.rint(luma).clip(0, 255).astype(np.uint8)


def _load_image_luma(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return to_luminance(arr)


def load_lightfield(dir_path) -> LightField:
    """Load a light-field directory.

    The directory must hold a ``manifest`` text file and the images it
    names.  Manifest grammar (blank lines and ``#`` comments ignored)::

        grid_rows=5
        grid_cols=5
        view <index> <s> <t> <filename>     # one line per view

    Images are decoded to 8-bit and reduced to luminance.
    """
    dir_path = Path(dir_path)
    manifest = dir_path / "manifest"
    if not manifest.is_file():
        raise ManifestError(f"no manifest file in {dir_path}")

    grid_rows = grid_cols = None
    entries: dict[int, tuple[float, float, str]] = {}
    for lineno, raw in enumerate(manifest.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("view"):
            parts = line.split()
            if len(parts) != 5:
                raise ManifestError(f"manifest line {lineno}: expected 'view <index> <s> <t> <file>'")
            try:
                idx = int(parts[1])
                s, t = float(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ManifestError(f"manifest line {lineno}: {exc}") from exc
            if idx in entries:
                raise ManifestError(f"manifest line {lineno}: view index {idx} repeated")
            entries[idx] = (s, t, parts[4])
        elif "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            try:
                if key == "grid_rows":
                    grid_rows = int(value)
                elif key == "grid_cols":
                    grid_cols = int(value)
                else:
                    raise ManifestError(f"manifest line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                raise ManifestError(f"manifest line {lineno}: {exc}") from exc
        else:
            raise ManifestError(f"manifest line {lineno}: unparseable entry {line!r}")

    if grid_rows is None or grid_cols is None:
        raise ManifestError("manifest must declare grid_rows and grid_cols")
    expected = grid_rows * grid_cols
    if sorted(entries) != list(range(expected)):
        raise ManifestError(
            f"manifest must declare view indices 0..{expected - 1}, got {sorted(entries)}"
        )

    seen: dict[tuple[float, float], int] = {}
    for idx in range(expected):
        s, t, _ = entries[idx]
        if (s, t) in seen:
            raise DuplicateViewpointError(s, t)
        seen[(s, t)] = idx
    if (0.0, 0.0) not in seen:
        raise ManifestError("manifest declares no (0, 0) center viewpoint")

    views = []
    shape = None
    for idx in range(expected):
        s, t, fname = entries[idx]
        path = dir_path / fname
        if not path.is_file():
            raise MissingViewError(s, t, fname)
        img = _load_image_luma(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise SizeMismatchError(
                f"view ({s:g}, {t:g}) has size {img.shape[::-1]}, expected {shape[::-1]}"
            )
        views.append(img)

    vps = np.array([entries[i][:2] for i in range(expected)], dtype=float)
    return LightField(
        grid_rows=grid_rows,
        grid_cols=grid_cols,
        views=np.stack(views),
        viewpoints=vps,
        center_index=seen[(0.0, 0.0)],
    )


def write_mask(mask: Mask, path) -> None:
    """Write a mask as a single-channel 8-bit PNG with {0 -> 0, 1 -> 255}."""
    Image.fromarray(mask.data * np.uint8(255), mode="L").save(Path(path), format="PNG")


def read_mask(path) -> Mask:
    """Read a mask written by :func:`write_mask`; any nonzero pixel is 1."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"))
    return Mask((arr > 0).astype(np.uint8))


def write_scalar_map(smap: ScalarMap, path, normalization: str = "linear_minmax") -> None:
    """Write a scalar map as an 8-bit PNG, min-max scaled to [0, 255].

    A constant map serializes as all zeros.
    """
    if normalization != "linear_minmax":
        raise ValueError(f"unknown normalization {normalization!r}")
    data = smap.data
    lo, hi = float(data.min()), float(data.max())
    if hi > lo:
        scaled = np.rint((data - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(data)
    Image.fromarray(scaled.astype(np.uint8), mode="L").save(Path(path), format="PNG")


def write_gray(values: np.ndarray, path) -> None:
    """Write raw 8-bit gray values (already in [0, 255]) as PNG."""
    arr = np.asarray(values)
    Image.fromarray(arr.astype(np.uint8), mode="L").save(Path(path), format="PNG")
