"""Satellite scene ingestion: tiling, dataset manifests, splits, fixtures.

Storage conventions: tiles are 8-bit RGB PNGs, masks are single-channel PNGs
with {0, 255} encoding {0, 1}, manifests are JSON-lines with one entry per
record. A scene may carry a geo sidecar JSON (resolution_m_per_px, origin
lon/lat); tile origins are derived from it with a local equirectangular
approximation and stored per entry.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError

DEFAULT_TILE_SIZE = 1024

# local meters-per-degree approximation, adequate at city scale
M_PER_DEG_LAT = 110_540.0
M_PER_DEG_LON_EQ = 111_320.0


@dataclass
class ImageTile:
    """One fixed-size RGB tile with geo metadata."""

    pixels: np.ndarray  # H x W x 3 uint8
    resolution_m_per_px: float = 1.05
    origin: tuple | None = None  # (lon, lat) of the top-left corner
    tile_id: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise InvalidInputError(
                f"tile pixels must be HxWx3, got {self.pixels.shape}"
            )
        if self.pixels.shape[0] != self.pixels.shape[1]:
            raise InvalidInputError("tiles must be square")
        if self.pixels.dtype != np.uint8:
            raise InvalidInputError("tile pixels must be uint8")
        if not self.resolution_m_per_px > 0:
            raise InvalidInputError("resolution_m_per_px must be positive")

    @property
    def size(self):
        return self.pixels.shape[0]


@dataclass
class MaskLabel:
    """Binary ground-truth mask aligned with a tile (1 = urban village)."""

    mask: np.ndarray  # H x W uint8 in {0, 1}
    tile_id: str = ""

    def __post_init__(self):
        self.mask = np.asarray(self.mask)
        if self.mask.ndim != 2:
            raise InvalidInputError(f"mask must be 2-D, got {self.mask.shape}")
        if not np.isin(self.mask, (0, 1)).all():
            raise InvalidInputError("mask values must be in {0, 1}")
        self.mask = self.mask.astype(np.uint8)


@dataclass
class ManifestEntry:
    tile: str
    mask: str | None
    tile_id: str
    city: str = ""
    year: int = 0
    origin: tuple | None = None
    resolution_m_per_px: float | None = None


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    split: str = "unsplit"

    def __post_init__(self):
        if self.split not in ("train", "val", "test", "unsplit"):
            raise InvalidInputError(f"unknown split {self.split!r}")
        ids = [e.tile_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("tile_ids in a manifest must be unique")

    def __len__(self):
        return len(self.entries)


def tile_scene(
    scene,
    tile_size=DEFAULT_TILE_SIZE,
    pad_value=0,
    *,
    resolution_m_per_px=1.05,
    origin=None,
    id_prefix="tile",
):
    """Cut a scene into row-major square tiles, padding edges with pad_value.

    Produces ceil(H/tile_size) * ceil(W/tile_size) tiles. When the scene has
    an origin, each tile gets its own derived top-left origin.
    """
    scene = np.asarray(scene)
    if scene.size == 0:
        raise InvalidInputError("scene is empty")
    if scene.ndim != 3 or scene.shape[2] != 3:
        raise InvalidInputError(f"scene must be HxWx3, got {scene.shape}")
    if tile_size < 1:
        raise InvalidInputError("tile_size must be >= 1")
    if not 0 <= pad_value <= 255:
        raise InvalidInputError("pad_value must be in [0, 255]")

    H, W = scene.shape[:2]
    rows = math.ceil(H / tile_size)
    cols = math.ceil(W / tile_size)
    padded = np.full(
        (rows * tile_size, cols * tile_size, 3), pad_value, dtype=np.uint8
    )
    padded[:H, :W] = scene

    tiles = []
    for r in range(rows):
        for c in range(cols):
            block = padded[
                r * tile_size : (r + 1) * tile_size,
                c * tile_size : (c + 1) * tile_size,
            ].copy()
            tiles.append(
                ImageTile(
                    pixels=block,
                    resolution_m_per_px=resolution_m_per_px,
                    origin=_shift_origin(
                        origin, c * tile_size, r * tile_size, resolution_m_per_px
                    ),
                    tile_id=f"{id_prefix}_r{r:03d}_c{c:03d}",
                )
            )
    return tiles


def _shift_origin(origin, dx_px, dy_px, res):
    if origin is None:
        return None
    lon, lat = origin
    dlat = -dy_px * res / M_PER_DEG_LAT
    dlon = dx_px * res / (M_PER_DEG_LON_EQ * math.cos(math.radians(lat)))
    return (lon + dlon, lat + dlat)


def merge_tiles(tiles, grid_shape):
    """Reassemble row-major tiles into one scene (inverse of tile_scene on
    the padded canvas; callers crop to the original extent)."""
    rows, cols = grid_shape
    if len(tiles) != rows * cols:
        raise InvalidInputError(
            f"expected {rows * cols} tiles for grid {grid_shape}, got {len(tiles)}"
        )
    sizes = {t.size for t in tiles}
    if len(sizes) != 1:
        raise InvalidInputError("tiles must share one size")
    ts = sizes.pop()
    scene = np.empty((rows * ts, cols * ts, 3), dtype=np.uint8)
    for i, tile in enumerate(tiles):
        r, c = divmod(i, cols)
        scene[r * ts : (r + 1) * ts, c * ts : (c + 1) * ts] = tile.pixels
    return scene


def split_dataset(manifest, ratios, seed):
    """Deterministic 3-way partition. Val/test sizes are floor(n * ratio);
    the remainder goes to train."""
    if len(manifest) == 0:
        raise InvalidInputError("cannot split an empty manifest")
    r_train, r_val, r_test = ratios
    if min(r_train, r_val, r_test) <= 0:
        raise InvalidInputError("ratios must be positive")
    if abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise InvalidInputError(f"ratios must sum to 1, got {ratios}")

    n = len(manifest)
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(n * r_val))
    n_test = int(math.floor(n * r_test))
    entries = [manifest.entries[i] for i in order]
    train = entries[: n - n_val - n_test]
    val = entries[n - n_val - n_test : n - n_test]
    test = entries[n - n_test :]
    return (
        DatasetManifest(train, "train"),
        DatasetManifest(val, "val"),
        DatasetManifest(test, "test"),
    )


@dataclass
class SynthParams:
    """Morphology knobs for the synthetic fixture generator."""

    uv_region_count: int = 2
    building_density: float = 0.5
    seed: int = 0
    size: int = 256
    resolution_m_per_px: float = 1.05
    origin: tuple | None = None


def gen_synthetic_tile(params):
    """Deterministic desk-scale fixture: a tile whose urban-village regions
    are dense clusters of small dark-roofed rectangles on a sparse, lighter
    background, plus the matching binary mask.

    The mask has exactly ``uv_region_count`` 8-connected components (the
    count is clamped to what fits in the tile). Separability from the
    background is intentional so tiny models can overfit in tests.
    """
    rng = np.random.default_rng(params.seed)
    size = int(params.size)
    count = max(0, int(params.uv_region_count))
    density = min(1.0, max(0.05, float(params.building_density)))

    noise = rng.integers(-8, 9, size=(size, size, 3))
    img = np.clip(185 + noise, 0, 255).astype(np.uint8)

    # sparse background blocks (large, light, well separated)
    n_bg = max(2, size // 24)
    for _ in range(n_bg):
        bw, bh = rng.integers(size // 8, size // 3, size=2)
        y = rng.integers(0, max(1, size - bh))
        x = rng.integers(0, max(1, size - bw))
        shade = rng.integers(160, 215)
        img[y : y + bh, x : x + bw] = (shade, shade, min(255, shade + 5))

    mask = np.zeros((size, size), dtype=np.uint8)

    # one region per grid cell keeps components cleanly separated
    if count > 0:
        grid = math.ceil(math.sqrt(count))
        cell = size // grid
        min_cell = 8  # below this a region cannot hold margin + interior
        while grid > 1 and cell < min_cell:
            grid -= 1
            cell = size // grid
        count = min(count, grid * grid)
        slots = rng.permutation(grid * grid)[:count]
        for slot in np.sort(slots):
            gy, gx = divmod(int(slot), grid)
            margin = max(2, cell // 8)
            max_extent = cell - 2 * margin
            rh = int(rng.integers(max(4, max_extent // 2), max_extent + 1))
            rw = int(rng.integers(max(4, max_extent // 2), max_extent + 1))
            y0 = gy * cell + margin + int(rng.integers(0, max_extent - rh + 1))
            x0 = gx * cell + margin + int(rng.integers(0, max_extent - rw + 1))
            mask[y0 : y0 + rh, x0 : x0 + rw] = 1
            _draw_village(img, rng, y0, x0, rh, rw, density)

    tile_id = f"synth_{params.seed:06d}"
    tile = ImageTile(
        pixels=img,
        resolution_m_per_px=params.resolution_m_per_px,
        origin=params.origin,
        tile_id=tile_id,
    )
    return tile, MaskLabel(mask=mask, tile_id=tile_id)


def _draw_village(img, rng, y0, x0, h, w, density):
    """Dense small rectangles with a warm palette and narrow gaps."""
    base = np.array([150, 108, 84], dtype=np.int16)
    region = base + rng.integers(-10, 11, size=3)
    img[y0 : y0 + h, x0 : x0 + w] = np.clip(region, 0, 255).astype(np.uint8)
    n_buildings = max(1, int(density * h * w / 12))
    for _ in range(n_buildings):
        bh = int(rng.integers(2, max(3, h // 6) + 1))
        bw = int(rng.integers(2, max(3, w // 6) + 1))
        by = y0 + int(rng.integers(0, max(1, h - bh)))
        bx = x0 + int(rng.integers(0, max(1, w - bw)))
        roof = np.clip(region + rng.integers(-45, -15), 0, 255)
        img[by : by + bh, bx : bx + bw] = roof.astype(np.uint8)


# ---------------------------------------------------------------------------
# file formats


def save_tile(tile, path):
    Image.fromarray(tile.pixels, mode="RGB").save(path)


def load_tile(path, *, resolution_m_per_px=1.05, origin=None, tile_id=None):
    arr = np.asarray(Image.open(path).convert("RGB"))
    return ImageTile(
        pixels=arr,
        resolution_m_per_px=resolution_m_per_px,
        origin=origin,
        tile_id=tile_id or Path(path).stem,
    )


def save_mask(label, path):
    Image.fromarray(label.mask * np.uint8(255), mode="L").save(path)


def load_mask(path, tile_id=None):
    arr = np.asarray(Image.open(path).convert("L"))
    return MaskLabel(
        mask=(arr > 127).astype(np.uint8), tile_id=tile_id or Path(path).stem
    )


def write_manifest(manifest, path):
    with open(path, "w") as fh:
        for e in manifest.entries:
            row = {
                "tile": e.tile,
                "mask": e.mask,
                "tile_id": e.tile_id,
                "city": e.city,
                "year": e.year,
                "split": manifest.split,
            }
            if e.origin is not None:
                row["origin"] = list(e.origin)
            if e.resolution_m_per_px is not None:
                row["resolution_m_per_px"] = e.resolution_m_per_px
            fh.write(json.dumps(row) + "\n")


def read_manifest(path):
    entries = []
    splits = set()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            splits.add(row.get("split", "unsplit"))
            entries.append(
                ManifestEntry(
                    tile=row["tile"],
                    mask=row.get("mask"),
                    tile_id=row["tile_id"],
                    city=row.get("city", ""),
                    year=int(row.get("year", 0)),
                    origin=tuple(row["origin"]) if row.get("origin") else None,
                    resolution_m_per_px=row.get("resolution_m_per_px"),
                )
            )
    if not splits:
        splits = {"unsplit"}
    if len(splits) > 1:
        raise InvalidInputError(f"manifest mixes splits: {sorted(splits)}")
    return DatasetManifest(entries, splits.pop())


def write_scene_meta(path, resolution_m_per_px, origin=None):
    meta = {"resolution_m_per_px": resolution_m_per_px}
    if origin is not None:
        meta["origin"] = list(origin)
    Path(path).write_text(json.dumps(meta, indent=2))


def read_scene_meta(path):
    meta = json.loads(Path(path).read_text())
    origin = tuple(meta["origin"]) if meta.get("origin") else None
    return float(meta["resolution_m_per_px"]), origin


def load_pair(entry, root=None):
    """Resolve a manifest entry into (ImageTile, MaskLabel or None)."""
    root = Path(root) if root else Path(".")
    tile = load_tile(
        root / entry.tile,
        resolution_m_per_px=entry.resolution_m_per_px or 1.05,
        origin=entry.origin,
        tile_id=entry.tile_id,
    )
    label = None
    if entry.mask:
        label = load_mask(root / entry.mask, tile_id=entry.tile_id)
        if label.mask.shape != tile.pixels.shape[:2]:
            raise InvalidInputError(
                f"mask shape {label.mask.shape} does not match tile "
                f"{tile.pixels.shape[:2]} for {entry.tile_id}"
            )
    return tile, label
