"""Labeled dataset synthesis: degradation variants of a source corpus,
leak-free train/test splits, corner-centered patch extraction, and the
manifest + patch-shard on-disk layout.

Corpus layout: image files (png/jpg/jpeg) directly inside the corpus
directory are image sources; each subdirectory containing image files is
one video source (its frames, ordered by filename).

On-disk dataset:
    manifest.jsonl   header line (format/version/mode/config) + one JSON
                     entry per degraded variant, in deterministic order
    train.lpch       patch shard for the train split
    test.lpch        patch shard for the test split
    config.txt       the exact RunConfig stamp

A shard holds the patches of its split's manifest entries in manifest
order; entries carry ``patch_count`` so shard rows map back to entries.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import CLASS_HEIGHTS
from .config import RunConfig, to_dict, write_stamp
from .corners import CornerSet, detect_corners
from .errors import DataError, ShapeError
from .imaging import LoadedImage, Plane, degrade, load_image

SHARD_MAGIC = b"LPCH1"
MANIFEST_FORMAT = "latres-manifest"
MANIFEST_VERSION = 1
_IMAGE_EXTS = (".png", ".jpg", ".jpeg")


@dataclass
class ManifestEntry:
    entry_id: int
    source: str              # image path, or video frame path
    kind: str                # {"image", "video_frame"}
    video_id: str | None
    factor: float            # degradation factor k
    label: float             # class 1..6 (classification) or k (regression)
    split: str               # {"train", "test"}
    corner_count: int
    patch_count: int


@dataclass
class PatchRecord:
    pixels: np.ndarray       # (64, 64) float32
    label: float
    entry_id: int
    corner: tuple            # (row, col) in the presented image


# ---------------------------------------------------------------------------
# variants
# ---------------------------------------------------------------------------

def _check_source_height(p: Plane):
    if p.h < 1080:
        raise DataError(f"source height {p.h} below the 1080 px minimum")


def make_class_variant(p: Plane, cls: int, method: str = "bicubic"):
    """Degrade to class ``cls``: k = {144,240,360,480,720,1080}[cls-1]/1080.
    Class 6 is the identity. Returns (plane, label)."""
    if not 1 <= cls <= 6:
        raise DataError(f"class must be 1..6, got {cls}")
    _check_source_height(p)
    k = CLASS_HEIGHTS[cls - 1] / 1080.0
    return degrade(p, k, method=method), cls


def make_reg_variant(p: Plane, a: int, method: str = "bicubic"):
    """Degrade with k = a/100 for a in 1..100. Returns (plane, target k)."""
    if not 1 <= a <= 100:
        raise DataError(f"regression level a must be 1..100, got {a}")
    _check_source_height(p)
    k = a / 100.0
    return degrade(p, k, method=method), k


def nearest_class(native_height: int) -> int:
    """Class whose nominal height is closest to ``native_height``; ties
    break toward the higher class."""
    if native_height < 1:
        raise DataError(f"height must be >= 1, got {native_height}")
    best = 1
    best_diff = abs(native_height - CLASS_HEIGHTS[0])
    for i in range(1, 6):
        diff = abs(native_height - CLASS_HEIGHTS[i])
        if diff <= best_diff:
            best = i + 1
            best_diff = diff
    return best


# ---------------------------------------------------------------------------
# corpus discovery, splits, frames
# ---------------------------------------------------------------------------

def discover_corpus(corpus_dir):
    """Returns (image_paths, video_dirs), each sorted by name."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise DataError(f"corpus directory {corpus_dir} does not exist")
    images = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in _IMAGE_EXTS)
    videos = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if any(f.suffix.lower() in _IMAGE_EXTS for f in sub.iterdir() if f.is_file()):
            videos.append(sub)
    if not images and not videos:
        raise DataError(f"corpus {corpus_dir} contains no images or frame directories")
    return images, videos


def split_corpus(sources, fraction: float = 0.7, seed: int = 0) -> dict:
    """Assign each source id to 'train' or 'test'. Deterministic in seed;
    the train share is round(fraction * n) clamped to [1, n-1]."""
    ids = sorted(str(s) for s in sources)
    n = len(ids)
    if n < 2:
        raise DataError(f"need >= 2 sources to split, got {n}")
    n_train = int(math.floor(fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    assign = {}
    for rank, idx in enumerate(order):
        assign[ids[idx]] = "train" if rank < n_train else "test"
    return assign


def list_frames(frame_dir) -> list:
    root = Path(frame_dir)
    frames = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in _IMAGE_EXTS)
    if not frames:
        raise DataError(f"frame directory {frame_dir} contains no decodable frames")
    return frames


def select_frames(frames: list, count: int = 10) -> list:
    """Uniformly spaced selection by filename order (all if fewer)."""
    n = len(frames)
    if n <= count:
        return list(frames)
    idx = np.floor(np.linspace(0, n - 1, count) + 0.5).astype(int)
    return [frames[i] for i in idx]


def ingest_video(frame_dir, count: int = 10):
    """Load the selected frames of one video. Returns (list of LoadedImage,
    video id)."""
    frames = select_frames(list_frames(frame_dir), count)
    return [load_image(f) for f in frames], Path(frame_dir).name


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------

def extract_patches(p: Plane, corners: CornerSet, size: int = 64,
                    entry_id: int = 0, label: float = 0.0) -> list:
    """size x size crops centered at each corner; corners within size/2 of
    any border are skipped."""
    half = size // 2
    out = []
    for r, c in corners.points:
        if r < half or c < half or r > p.h - half or c > p.w - half:
            continue
        crop = p.samples[r - half : r + half, c - half : c + half]
        out.append(PatchRecord(pixels=np.ascontiguousarray(crop), label=label,
                               entry_id=entry_id, corner=(r, c)))
    return out


# ---------------------------------------------------------------------------
# manifest + shard I/O
# ---------------------------------------------------------------------------

def write_manifest(path, mode: str, cfg: RunConfig, entries: list) -> None:
    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "mode": mode,
        "count": len(entries),
        "config": to_dict(cfg),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e in entries:
            fh.write(json.dumps(asdict(e), sort_keys=True) + "\n")


def read_manifest(path):
    """Returns (header dict, list of ManifestEntry)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise DataError(f"manifest {path} is empty")
    header = json.loads(lines[0])
    if header.get("format") != MANIFEST_FORMAT:
        raise DataError(f"manifest {path}: unrecognized header")
    entries = []
    for line in lines[1:]:
        d = json.loads(line)
        d["video_id"] = d.get("video_id")
        entries.append(ManifestEntry(**d))
    if len(entries) != header.get("count"):
        raise DataError(f"manifest {path}: header count {header.get('count')} != {len(entries)} entries")
    return header, entries


def write_patch_shard(path, records: list) -> None:
    """LPCH1 shard: magic, u32 count, then per record a float32 label and
    64*64 float32 pixels (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(SHARD_MAGIC)
        fh.write(struct.pack("<I", len(records)))
        for rec in records:
            px = rec.pixels
            if px.shape != (64, 64):
                raise ShapeError("write_patch_shard", f"patch must be 64x64, got {px.shape}")
            fh.write(struct.pack("<f", float(rec.label)))
            fh.write(px.astype("<f4", copy=False).tobytes())


def read_patch_shard(path):
    """Returns (labels (n,) float32, pixels (n,64,64) float32)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read shard {path}: {exc}") from exc
    if len(blob) < len(SHARD_MAGIC) + 4 or blob[: len(SHARD_MAGIC)] != SHARD_MAGIC:
        raise DataError(f"shard {path}: bad magic")
    (count,) = struct.unpack_from("<I", blob, len(SHARD_MAGIC))
    rec_len = 4 + 64 * 64 * 4
    need = len(SHARD_MAGIC) + 4 + count * rec_len
    if len(blob) != need:
        raise DataError(f"shard {path}: expected {need} bytes for {count} records, found {len(blob)}")
    raw = np.frombuffer(blob, dtype="<f4", offset=len(SHARD_MAGIC) + 4)
    raw = raw.reshape(count, 1 + 64 * 64)
    labels = raw[:, 0].copy()
    pixels = raw[:, 1:].reshape(count, 64, 64).copy()
    return labels, pixels


# ---------------------------------------------------------------------------
# full synthesis pipeline
# ---------------------------------------------------------------------------

def _variant_plan(mode: str, cfg: RunConfig, rng: np.random.Generator):
    """List of (factor k, label) pairs for one source."""
    if mode == "class":
        return [(CLASS_HEIGHTS[c - 1] / 1080.0, float(c)) for c in range(1, 7)]
    if mode == "reg":
        levels = rng.integers(1, 101, size=cfg.synth_reg_variants)
        return [(int(a) / 100.0, int(a) / 100.0) for a in levels]
    raise DataError(f"unknown synthesis mode {mode!r} (expected 'class' or 'reg')")


def build_dataset(corpus_dir, mode: str, out_dir, cfg: RunConfig) -> dict:
    """Synthesize a dataset directory from a corpus. Returns summary stats."""
    images, videos = discover_corpus(corpus_dir)
    sources = [str(p) for p in images] + [str(p) for p in videos]
    assign = split_corpus(sources, fraction=cfg.split_train_fraction, seed=cfg.seed)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    shard_records = {"train": [], "test": []}
    entry_id = 0

    def process_plane(plane: Plane, source_label: str, kind: str, video_id, split: str,
                      plan):
        nonlocal entry_id
        for k, label in plan:
            presented = degrade(plane, k, method=cfg.resample_method)
            corners = detect_corners(
                presented,
                radius=cfg.nms_radius,
                rel_threshold=cfg.nms_rel_threshold,
                max_corners=cfg.nms_max_corners,
                kappa=cfg.harris_kappa,
                sigma=cfg.harris_sigma,
            )
            patches = extract_patches(presented, corners, size=cfg.patch_size,
                                      entry_id=entry_id, label=label)
            if len(patches) > cfg.patch_max_per_entry:
                patches = patches[: cfg.patch_max_per_entry]
            entries.append(ManifestEntry(
                entry_id=entry_id,
                source=source_label,
                kind=kind,
                video_id=video_id,
                factor=k,
                label=label,
                split=split,
                corner_count=len(corners),
                patch_count=len(patches),
            ))
            shard_records[split].extend(patches)
            entry_id += 1

    for si, img_path in enumerate(images):
        plane = load_image(img_path).plane
        rng = np.random.default_rng([cfg.seed, si])
        plan = _variant_plan(mode, cfg, rng)
        process_plane(plane, str(img_path), "image", None, assign[str(img_path)], plan)

    for vi, vdir in enumerate(videos):
        loaded, video_id = ingest_video(vdir)
        rng = np.random.default_rng([cfg.seed, len(images) + vi])
        plan = _variant_plan(mode, cfg, rng)
        for frame in loaded:
            process_plane(frame.plane, frame.path, "video_frame", video_id,
                          assign[str(vdir)], plan)

    write_manifest(out / "manifest.jsonl", mode, cfg, entries)
    write_patch_shard(out / "train.lpch", shard_records["train"])
    write_patch_shard(out / "test.lpch", shard_records["test"])
    write_stamp(cfg, out / "config.txt")
    return {
        "entries": len(entries),
        "train_patches": len(shard_records["train"]),
        "test_patches": len(shard_records["test"]),
        "sources": len(sources),
    }


def shard_ranges(entries: list, split: str) -> list:
    """(entry, start, stop) shard-row ranges for one split, manifest order."""
    out = []
    pos = 0
    for e in entries:
        if e.split != split:
            continue
        out.append((e, pos, pos + e.patch_count))
        pos += e.patch_count
    return out
