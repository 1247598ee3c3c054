"""File formats: IDX datasets, CSV datasets, anchor files, the binary
model container, history CSVs, and PGM prototype sheets.

Model container layout (all integers little-endian):

    magic      4 bytes  b"STM1"
    version    u16      currently 1
    ndim       u8       1 or 2
    dims       ndim x u32
    M          u32      input dimension
    kind       u8       0 kmeans, 1 som, 2 stm, 3 lvq
    sigma_r    f64      0.0 when unset
    sigma_t    f64      0.0 when unset
    seed       u64
    payload    K * M f64, row-major prototype matrix
    anchors    u32 count, then per anchor:
               u16 label byte length, utf-8 label, ndim x f64 coordinate

Loading a saved model restores the prototype matrix bit for bit.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataFormatError
from .grid import Codebook, Dataset, GridTopology, LabelAnchors
from .training import TrainingHistory

__all__ = [
    "ModelFile",
    "load_idx",
    "load_csv",
    "save_model",
    "load_model",
    "load_anchors",
    "export_prototype_grid",
    "export_sample_sheet",
    "write_history_csv",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

MODEL_MAGIC = b"STM1"
MODEL_VERSION = 1
_KIND_TAGS = {"kmeans": 0, "som": 1, "stm": 2, "lvq": 3}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

SEPARATOR_VALUE = 255  # pixel value of the 1-px frame between sheet tiles


def _read_file(path) -> bytes:
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc


def load_idx(images_path, labels_path=None) -> Dataset:
    """Dataset from big-endian IDX files. Image bytes are scaled to
    [0, 1]; label bytes become decimal strings."""
    blob = _read_file(images_path)
    if len(blob) < 16:
        raise DataFormatError(f"{images_path}: truncated IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad image magic 0x{magic:08x}, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x}"
        )
    expected = 16 + n * rows * cols
    if len(blob) != expected:
        raise DataFormatError(
            f"{images_path}: expected {expected} bytes for {n} images of "
            f"{rows}x{cols}, found {len(blob)}"
        )
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=16)
    patterns = pixels.astype(np.float64).reshape(n, rows * cols) / 255.0

    labels = None
    if labels_path is not None:
        lblob = _read_file(labels_path)
        if len(lblob) < 8:
            raise DataFormatError(f"{labels_path}: truncated IDX header")
        lmagic, ln = struct.unpack(">II", lblob[:8])
        if lmagic != IDX_LABEL_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad label magic 0x{lmagic:08x}, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        if len(lblob) != 8 + ln:
            raise DataFormatError(
                f"{labels_path}: expected {8 + ln} bytes for {ln} labels, "
                f"found {len(lblob)}"
            )
        if ln != n:
            raise DataFormatError(
                f"{labels_path}: {ln} labels for {n} images"
            )
        labels = tuple(str(b) for b in lblob[8:])
    return Dataset(patterns, labels)


def load_csv(path, label_column: str | None = None) -> Dataset:
    """Dataset from a headed CSV. All columns are numeric features except
    an optional label column selected by name."""
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = rows[0]
    if label_column is not None and label_column not in header:
        raise ConfigurationError(
            f"{path}: no column named '{label_column}' in header {header}"
        )
    label_idx = header.index(label_column) if label_column is not None else None
    feature_idx = [i for i in range(len(header)) if i != label_idx]
    if not feature_idx:
        raise DataFormatError(f"{path}: no feature columns")

    patterns = []
    labels: list[str] | None = [] if label_idx is not None else None
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: line {lineno}: expected {len(header)} fields, "
                f"got {len(row)}"
            )
        values = []
        for i in feature_idx:
            try:
                values.append(float(row[i]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}: column '{header[i]}' is not "
                    f"numeric: {row[i]!r}"
                ) from None
        patterns.append(values)
        if labels is not None:
            labels.append(row[label_idx])
    x = np.array(patterns, dtype=np.float64).reshape(len(patterns), len(feature_idx))
    return Dataset(x, tuple(labels) if labels is not None else None)


def _parse_pgm(blob: bytes, path) -> np.ndarray:
    # header: P5, then width/height/maxval tokens with '#' comments allowed
    if not blob.startswith(b"P5"):
        raise DataFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            end = blob.find(b"\n", pos)
            if end < 0:
                raise DataFormatError(f"{path}: unterminated PGM header comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: truncated PGM header")
        fields.append(blob[start:pos])
    pos += 1  # the single whitespace byte before the raster
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise DataFormatError(f"{path}: non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise DataFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise DataFormatError(
            f"{path}: maxval {maxval} unsupported, only 8-bit (255) PGM"
        )
    raster = blob[pos:]
    if len(raster) != width * height:
        raise DataFormatError(
            f"{path}: expected {width * height} raster bytes, found {len(raster)}"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def load_pgm_dir(path) -> Dataset:
    """Unlabeled dataset from a directory of equally sized 8-bit binary
    PGM images: files in sorted name order, each image flattened to one
    row, bytes scaled to [0, 1]."""
    try:
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".pgm"))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not names:
        raise DataFormatError(f"{path}: no .pgm files")
    rows = []
    shape: tuple[int, int] | None = None
    for name in names:
        full = os.path.join(path, name)
        img = _parse_pgm(_read_file(full), full)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DataFormatError(
                f"{full}: image is {img.shape[0]}x{img.shape[1]}, "
                f"expected {shape[0]}x{shape[1]} like the first file"
            )
        rows.append(img.reshape(-1))
    x = np.stack(rows).astype(np.float64) / 255.0
    return Dataset(x)


@dataclass
class ModelFile:
    """A trained codebook plus the run settings needed to reuse it."""

    codebook: Codebook
    kind_name: str
    sigma_r: float | None = None
    sigma_t: float | None = None
    seed: int = 0
    anchors: LabelAnchors | None = None

    def __post_init__(self):
        if self.kind_name not in _KIND_TAGS:
            raise ValueError(f"unknown kind '{self.kind_name}'")


def save_model(model: ModelFile, path) -> None:
    cb = model.codebook
    topo = cb.topology
    parts = [MODEL_MAGIC, struct.pack("<H", MODEL_VERSION), struct.pack("<B", topo.ndim)]
    for d in topo.dims:
        parts.append(struct.pack("<I", d))
    parts.append(struct.pack("<I", cb.m))
    parts.append(struct.pack("<B", _KIND_TAGS[model.kind_name]))
    parts.append(struct.pack("<d", model.sigma_r if model.sigma_r is not None else 0.0))
    parts.append(struct.pack("<d", model.sigma_t if model.sigma_t is not None else 0.0))
    parts.append(struct.pack("<Q", int(model.seed)))
    parts.append(np.ascontiguousarray(cb.weights, dtype="<f8").tobytes())
    anchors = model.anchors
    if anchors is None:
        parts.append(struct.pack("<I", 0))
    else:
        parts.append(struct.pack("<I", len(anchors)))
        for label in anchors.labels:
            raw = label.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
            for v in anchors.coordinate_for(label):
                parts.append(struct.pack("<d", float(v)))
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Cursor:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataFormatError(
                f"{self.path}: truncated model file at byte {self.pos}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path) -> ModelFile:
    cur = _Cursor(_read_file(path), path)
    if cur.take(4) != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a model file (bad magic)")
    (version,) = cur.unpack("<H")
    if version != MODEL_VERSION:
        raise DataFormatError(
            f"{path}: model format version {version} is unsupported, "
            f"this build reads version {MODEL_VERSION}"
        )
    (ndim,) = cur.unpack("<B")
    if ndim not in (1, 2):
        raise DataFormatError(f"{path}: invalid grid rank {ndim}")
    dims = tuple(cur.unpack("<I")[0] for _ in range(ndim))
    if any(d < 1 for d in dims):
        raise DataFormatError(f"{path}: invalid grid extents {dims}")
    (m,) = cur.unpack("<I")
    (tag,) = cur.unpack("<B")
    if tag not in _TAG_KINDS:
        raise DataFormatError(f"{path}: unknown kind tag {tag}")
    (sigma_r,) = cur.unpack("<d")
    (sigma_t,) = cur.unpack("<d")
    (seed,) = cur.unpack("<Q")
    topo = GridTopology(dims)
    k = topo.unit_count
    raw = cur.take(k * m * 8)
    weights = np.frombuffer(raw, dtype="<f8").reshape(k, m).copy()
    (anchor_count,) = cur.unpack("<I")
    anchors = None
    if anchor_count:
        table = {}
        for _ in range(anchor_count):
            (llen,) = cur.unpack("<H")
            label = cur.take(llen).decode("utf-8")
            coord = [cur.unpack("<d")[0] for _ in range(ndim)]
            if label in table:
                raise DataFormatError(f"{path}: duplicate anchor label '{label}'")
            table[label] = coord
        anchors = LabelAnchors(table)
    if cur.pos != len(cur.blob):
        raise DataFormatError(
            f"{path}: {len(cur.blob) - cur.pos} trailing bytes after model data"
        )
    return ModelFile(
        Codebook(weights, topo),
        _TAG_KINDS[tag],
        sigma_r if sigma_r > 0 else None,
        sigma_t if sigma_t > 0 else None,
        int(seed),
        anchors,
    )


def load_anchors(path, topo: GridTopology) -> LabelAnchors:
    """Anchor file: '#' comments and blank lines are skipped, the first
    content line declares the grid ('grid R C' or 'grid K'), each further
    line is a label followed by one coordinate per grid axis."""
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc

    declared: tuple[int, ...] | None = None
    table: dict[str, list[float]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if declared is None:
            if tokens[0] != "grid" or len(tokens) not in (2, 3):
                raise ConfigurationError(
                    f"{path}: line {lineno}: expected 'grid R C' or 'grid K', "
                    f"got {line!r}"
                )
            try:
                declared = tuple(int(t) for t in tokens[1:])
            except ValueError:
                raise ConfigurationError(
                    f"{path}: line {lineno}: grid extents must be integers: {line!r}"
                ) from None
            if declared != topo.dims:
                raise ConfigurationError(
                    f"{path}: line {lineno}: file declares grid {declared}, "
                    f"model uses {topo.dims}"
                )
            continue
        label = tokens[0]
        if label in table:
            raise ConfigurationError(
                f"{path}: line {lineno}: duplicate label '{label}'"
            )
        coords = tokens[1:]
        if len(coords) != topo.ndim:
            raise ConfigurationError(
                f"{path}: line {lineno}: expected {topo.ndim} coordinate(s) "
                f"for label '{label}', got {len(coords)}"
            )
        try:
            values = [float(c) for c in coords]
        except ValueError:
            raise ConfigurationError(
                f"{path}: line {lineno}: coordinates must be numeric: {line!r}"
            ) from None
        if not all(math.isfinite(v) for v in values):
            raise ConfigurationError(
                f"{path}: line {lineno}: coordinates must be finite"
            )
        for v, extent in zip(values, topo.dims):
            if v < 0 or v > extent - 1:
                raise ConfigurationError(
                    f"{path}: line {lineno}: coordinate {v} outside "
                    f"[0, {extent - 1}]"
                )
        table[label] = values
    if declared is None:
        raise ConfigurationError(f"{path}: missing 'grid' declaration")
    if not table:
        raise ConfigurationError(f"{path}: no anchors defined")
    return LabelAnchors(table)


def _scale_to_bytes(values: np.ndarray) -> np.ndarray:
    """Global min-max scaling to 0..255; a constant array maps to 0."""
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = np.rint((values - lo) * (255.0 / (hi - lo)))
    return np.clip(scaled, 0, 255).astype(np.uint8)


def _write_pgm(path, image: np.ndarray, comment: str) -> None:
    h, w = image.shape
    header = f"P5\n# {comment}\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(image.astype(np.uint8).tobytes())


def _tile_sheet(tiles: np.ndarray, grid_rows: int, grid_cols: int,
                tile_rows: int, tile_cols: int) -> np.ndarray:
    """Arrange pre-scaled uint8 tiles on a canvas with a 1-pixel frame
    around every tile. Canvas size: rows*(th+1)+1 by cols*(tw+1)+1."""
    height = grid_rows * (tile_rows + 1) + 1
    width = grid_cols * (tile_cols + 1) + 1
    canvas = np.full((height, width), SEPARATOR_VALUE, dtype=np.uint8)
    for idx in range(tiles.shape[0]):
        r, c = divmod(idx, grid_cols)
        top = 1 + r * (tile_rows + 1)
        left = 1 + c * (tile_cols + 1)
        canvas[top : top + tile_rows, left : left + tile_cols] = tiles[idx]
    return canvas


def export_prototype_grid(cb: Codebook, tile_rows: int, tile_cols: int, path) -> None:
    """Write the whole codebook as one PGM sheet: each prototype reshaped
    to tile_rows x tile_cols and placed at its grid position, min-max
    scaled over the whole codebook, 1-pixel separators between tiles.

    Output bytes are a pure function of the codebook, so repeated exports
    are identical.
    """
    topo = cb.topology
    if topo.ndim != 2:
        raise ValueError("prototype sheets need a 2D grid topology")
    if tile_rows * tile_cols != cb.m:
        raise ValueError(
            f"tile {tile_rows}x{tile_cols} does not hold {cb.m} weights"
        )
    tiles = _scale_to_bytes(cb.weights).reshape(cb.k, tile_rows, tile_cols)
    sheet = _tile_sheet(tiles, topo.dims[0], topo.dims[1], tile_rows, tile_cols)
    _write_pgm(
        path, sheet,
        f"{topo.dims[0]}x{topo.dims[1]} prototypes, tiles {tile_rows}x{tile_cols}",
    )


def export_sample_sheet(patterns: np.ndarray, tile_rows: int, tile_cols: int,
                        path) -> None:
    """Write generated patterns as a near-square PGM sheet with the same
    tiling and scaling rules as the prototype sheet."""
    x = np.asarray(patterns, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty 2D pattern matrix")
    if tile_rows * tile_cols != x.shape[1]:
        raise ValueError(
            f"tile {tile_rows}x{tile_cols} does not hold {x.shape[1]} values"
        )
    count = x.shape[0]
    cols = int(math.ceil(math.sqrt(count)))
    rows = int(math.ceil(count / cols))
    tiles = _scale_to_bytes(x).reshape(count, tile_rows, tile_cols)
    sheet = _tile_sheet(tiles, rows, cols, tile_rows, tile_cols)
    _write_pgm(path, sheet, f"{count} generated patterns, tiles {tile_rows}x{tile_cols}")


def write_history_csv(history: TrainingHistory, path) -> None:
    """Per-iteration log: iteration, energy, movement, eta, sigma_r."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "energy", "movement", "eta", "sigma_r"])
        for rec in history:
            writer.writerow([
                rec.iteration, repr(rec.energy), repr(rec.movement),
                repr(rec.eta), repr(rec.sigma_r),
            ])
