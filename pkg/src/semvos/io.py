"""File formats: binary PGM/PPM rasters, proposal manifests, sequence
manifests and pipeline configuration files.

Every reader rejects input it cannot interpret exactly; nothing is resized,
rescaled or guessed.
"""
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import as_mask, as_graymap


class DataError(Exception):
    """Input data is missing, malformed or inconsistent."""


class PnmError(DataError):
    def __init__(self, path, offset, message):
        super().__init__(f"{path}: byte offset {offset}: {message}")
        self.path = path
        self.offset = offset


_WHITESPACE = b" \t\r\n\v\f"


def _read_bytes(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"{path}: cannot read file ({exc.strerror})") from None


def parse_pnm(data, magic, path="<bytes>"):
    """Parse a binary PGM (``P5``) or PPM (``P6``) with maxval 255.

    Returns a uint8 array of shape (H, W) or (H, W, 3).
    """
    if data[:2] != magic:
        raise PnmError(path, 0, f"bad magic {data[:2]!r}, expected {magic!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise PnmError(path, pos, "truncated header")
        ch = data[pos:pos + 1]
        if ch in _WHITESPACE and ch:
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append((int(data[start:pos]), start))
        else:
            raise PnmError(path, pos, f"unexpected header byte {ch!r}")
    (width, w_off), (height, h_off), (maxval, m_off) = fields
    if width < 1:
        raise PnmError(path, w_off, f"width must be >= 1, got {width}")
    if height < 1:
        raise PnmError(path, h_off, f"height must be >= 1, got {height}")
    if maxval != 255:
        raise PnmError(path, m_off, f"maxval must be 255, got {maxval}")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise PnmError(path, pos, "expected a single whitespace byte after maxval")
    pos += 1
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise PnmError(
            path, pos + len(payload),
            f"truncated payload: expected {expected} bytes, got {len(payload)}",
        )
    if len(data) > pos + expected:
        raise PnmError(path, pos + expected, "trailing data after payload")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape).copy()


def format_pnm(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    magic = b"P6" if arr.ndim == 3 else b"P5"
    h, w = arr.shape[:2]
    return magic + b"\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(arr).tobytes()


def _write_bytes(path, payload):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(payload)


def read_pgm(path):
    return parse_pnm(_read_bytes(path), b"P5", path)


def read_mask(path):
    """Binary mask from a PGM: values above 127 are foreground."""
    return read_pgm(path) > 127


def write_mask(path, mask):
    _write_bytes(path, format_pnm(np.where(as_mask(mask), 255, 0)))


def read_graymap(path):
    return read_pgm(path).astype(np.float64) / 255.0


def write_graymap(path, g):
    g = as_graymap(g)
    _write_bytes(path, format_pnm(np.clip(np.rint(g * 255.0), 0, 255)))


def write_labels(path, labels):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("label values must fit in one byte")
    _write_bytes(path, format_pnm(labels))


def read_rgb(path):
    return parse_pnm(_read_bytes(path), b"P6", path)


def write_rgb(path, image):
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 raster, got shape {image.shape}")
    _write_bytes(path, format_pnm(image))


# -- proposal manifests -------------------------------------------------------

@dataclass(frozen=True)
class ProposalRecord:
    frame: int
    mask_path: str
    category: str
    confidence: float
    line: int


@dataclass
class ProposalManifest:
    """Parsed proposal manifest.

    Text format, one record per line, ``#`` starts a comment::

        size <width> <height>
        <frame> <mask.pgm> <category> <confidence>

    Mask paths are relative to the manifest's directory. ``size`` is
    required as soon as there is at least one record.
    """

    path: str
    size: tuple = None
    frames: list = field(default_factory=list)


def read_proposal_manifest(path):
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read proposal manifest ({exc.strerror})") from None
    base = os.path.dirname(path)
    manifest = ProposalManifest(path)
    records = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        where = f"{path}:{lineno}"
        if parts[0] == "size":
            if len(parts) != 3 or manifest.size is not None:
                raise DataError(f"{where}: expected a single 'size <width> <height>' line")
            try:
                width, height = int(parts[1]), int(parts[2])
            except ValueError:
                raise DataError(f"{where}: size must be two integers") from None
            if width < 1 or height < 1:
                raise DataError(f"{where}: size must be positive")
            manifest.size = (width, height)
            continue
        if len(parts) != 4:
            raise DataError(
                f"{where}: expected '<frame> <mask> <category> <confidence>', got {len(parts)} fields"
            )
        try:
            frame = int(parts[0])
            confidence = float(parts[3])
        except ValueError:
            raise DataError(f"{where}: frame must be an integer and confidence a number") from None
        if frame < 0:
            raise DataError(f"{where}: negative frame index {frame}")
        if not 0.0 <= confidence <= 1.0:
            raise DataError(f"{where}: confidence {confidence} outside [0, 1]")
        records.append(
            ProposalRecord(frame, os.path.join(base, parts[1]), parts[2], confidence, lineno)
        )
    if records and manifest.size is None:
        raise DataError(f"{path}: manifest has records but no 'size' line")
    if records:
        manifest.frames = [[] for _ in range(max(r.frame for r in records) + 1)]
        for r in records:
            manifest.frames[r.frame].append(r)
    return manifest


def load_proposals(path, n_frames=None):
    """Per-frame lists of :class:`~semvos.semantics.InstanceProposal`, in file order."""
    from .semantics import InstanceProposal

    manifest = read_proposal_manifest(path)
    width, height = manifest.size or (None, None)
    frames = []
    for idx, records in enumerate(manifest.frames):
        props = []
        for r in records:
            mask = read_mask(r.mask_path)
            if mask.shape != (height, width):
                raise DataError(
                    f"{path}:{r.line}: frame {idx}: mask {r.mask_path} is "
                    f"{mask.shape[1]}x{mask.shape[0]}, manifest declares {width}x{height}"
                )
            props.append(InstanceProposal(mask, r.category, r.confidence))
        frames.append(props)
    if n_frames is not None:
        if len(frames) > n_frames:
            raise DataError(f"{path}: proposals reference frame {len(frames) - 1} of a {n_frames}-frame sequence")
        frames.extend([] for _ in range(n_frames - len(frames)))
    return frames


# -- sequence manifests -------------------------------------------------------

_SEQUENCE_KEYS = {
    "name", "frames", "annotation", "annotations", "ground_truth",
    "proposals", "contours", "attributes",
}


@dataclass
class Sequence:
    name: str
    frames: list
    annotations: list
    ground_truth: list = None
    proposals: list = None
    contours: list = None
    attributes: list = field(default_factory=list)
    frame_paths: list = field(default_factory=list)

    @property
    def shape(self):
        return self.frames[0].shape[:2]


def load_sequence(path):
    """Load a JSON sequence manifest and every file it references.

    Keys: ``name``, ``frames`` (PPM paths), ``annotation`` (frame-0 PGM) or
    ``annotations`` (one PGM per object), and optional ``ground_truth``
    (per-frame PGM or null), ``proposals`` (manifest path), ``contours``
    (per-frame PGM or null) and ``attributes`` (free-form tags).
    """
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            entry = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: cannot read sequence manifest ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(entry, dict):
        raise DataError(f"{path}: sequence manifest must be a JSON object")
    unknown = set(entry) - _SEQUENCE_KEYS
    if unknown:
        raise DataError(f"{path}: unknown keys {sorted(unknown)}")
    base = os.path.dirname(path)

    def resolve(p):
        return None if p is None else os.path.join(base, p)

    frame_paths = [resolve(p) for p in entry.get("frames") or []]
    if not frame_paths:
        raise DataError(f"{path}: 'frames' must list at least one frame")
    if ("annotation" in entry) == ("annotations" in entry):
        raise DataError(f"{path}: give exactly one of 'annotation' or 'annotations'")
    ann_paths = entry.get("annotations") or [entry.get("annotation")]
    frames = [read_rgb(p) for p in frame_paths]
    shape = frames[0].shape[:2]
    for i, f in enumerate(frames):
        if f.shape[:2] != shape:
            raise DataError(f"{frame_paths[i]}: frame {i} is {f.shape[:2]}, frame 0 is {shape}")

    def masks_like(paths, what):
        out = []
        for i, p in enumerate(paths):
            if p is None:
                out.append(None)
                continue
            m = read_mask(resolve(p))
            if m.shape != shape:
                raise DataError(f"{resolve(p)}: {what} {i} is {m.shape}, frames are {shape}")
            out.append(m)
        return out

    annotations = masks_like(ann_paths, "annotation")
    if any(a is None for a in annotations):
        raise DataError(f"{path}: annotation paths must not be null")
    ground_truth = None
    if entry.get("ground_truth") is not None:
        if len(entry["ground_truth"]) != len(frames):
            raise DataError(f"{path}: 'ground_truth' must have one entry per frame")
        ground_truth = masks_like(entry["ground_truth"], "ground truth")
    contours = None
    if entry.get("contours") is not None:
        if len(entry["contours"]) != len(frames):
            raise DataError(f"{path}: 'contours' must have one entry per frame")
        contours = []
        for i, p in enumerate(entry["contours"]):
            if p is None:
                contours.append(None)
                continue
            g = read_graymap(resolve(p))
            if g.shape != shape:
                raise DataError(f"{resolve(p)}: contour map {i} is {g.shape}, frames are {shape}")
            contours.append(g)
    proposals = None
    if entry.get("proposals") is not None:
        proposals = load_proposals(resolve(entry["proposals"]), len(frames))
        for i, props in enumerate(proposals):
            for p in props:
                if p.mask.shape != shape:
                    raise DataError(f"{path}: frame {i}: proposal masks do not match frame size")
    return Sequence(
        name=entry.get("name") or os.path.splitext(os.path.basename(path))[0],
        frames=frames,
        annotations=annotations,
        ground_truth=ground_truth,
        proposals=proposals,
        contours=contours,
        attributes=list(entry.get("attributes") or []),
        frame_paths=frame_paths,
    )


# -- configuration ------------------------------------------------------------

def load_config(path):
    """Read a JSON pipeline configuration; unknown keys are rejected."""
    from .pipeline import PipelineConfig

    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: cannot read config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    try:
        return PipelineConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
