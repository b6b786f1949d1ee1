"""Embedding-bundle ingestion, serialization, and synthetic generation.

This module stands in for the frozen image-text backbone and the video
datasets: everything downstream consumes precomputed frame/text embedding
bundles, whether read from disk or synthesized.

Bundle file layout (little-endian):

    b"VCTR" | u8 version | u32 meta_len | meta JSON | float32 payload | u32 crc32

The metadata JSON holds counts (n, m, k, dim), the label mode, per-entry
aux category ids, and one record per bundle (video id, frame count,
label, split). The payload is the shared class-text matrix, the shared
aux-text matrix, then each bundle's frames, all float32 — so round trips
are bit-exact. The CRC covers every byte before it.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from vctext.errors import (
    ChecksumError,
    InsufficientClipsError,
    LabelError,
    MagicMismatchError,
    ParseError,
    RangeError,
    ShapeError,
    SpecError,
    TruncationError,
    VersionError,
    ZeroNormError,
)
from vctext.numerics.rng import Rng

MAGIC = b"VCTR"
VERSION = 1
NORM_GUARD = 1e-8


@dataclass
class EmbeddingBundle:
    """One video's frame embeddings plus its label and split tag."""

    video_id: str
    frames: np.ndarray            # (T, D) float
    label: int | np.ndarray       # class index, or (n,) binary vector
    split: str = "train"

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class BundleSet:
    """Bundles plus the text matrices every bundle of a dataset shares."""

    class_text: np.ndarray        # (n, D)
    aux_text: np.ndarray          # (m, D); m may be 0
    aux_categories: np.ndarray    # (m,) ints < n_categories
    n_categories: int
    label_mode: str               # "single" | "multi"
    bundles: list[EmbeddingBundle] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.class_text.shape[0]

    @property
    def n_aux(self) -> int:
        return self.aux_text.shape[0]

    @property
    def dim(self) -> int:
        return self.class_text.shape[1]

    def split(self, tag: str) -> list[EmbeddingBundle]:
        return [b for b in self.bundles if b.split == tag]

    def validate(self) -> None:
        if self.label_mode not in ("single", "multi"):
            raise LabelError(f"unknown label mode '{self.label_mode}'")
        if self.aux_text.shape[0] != self.aux_categories.shape[0]:
            raise ShapeError("aux_text rows != aux_categories entries")
        if self.n_aux and self.aux_categories.max(initial=-1) >= self.n_categories:
            raise ShapeError("aux category id out of range")
        for mat, name in ((self.class_text, "class_text"), (self.aux_text, "aux_text")):
            if mat.size and np.linalg.norm(mat, axis=1).min() <= NORM_GUARD:
                raise ZeroNormError(f"{name} contains a near-zero row")
        for b in self.bundles:
            if b.frames.ndim != 2 or b.frames.shape[0] < 1:
                raise ShapeError(f"{b.video_id}: frames must be (T>=1, D)")
            if b.frames.shape[1] != self.dim:
                raise ShapeError(f"{b.video_id}: frame dim {b.frames.shape[1]} "
                                 f"!= {self.dim}")
            if np.linalg.norm(b.frames, axis=1).min() <= NORM_GUARD:
                raise ZeroNormError(f"{b.video_id}: near-zero frame embedding")
            if self.label_mode == "single":
                if not isinstance(b.label, (int, np.integer)) \
                        or not 0 <= int(b.label) < self.n_classes:
                    raise LabelError(f"{b.video_id}: bad single label {b.label!r}")
            else:
                lab = np.asarray(b.label)
                if lab.shape != (self.n_classes,) or not np.isin(lab, (0, 1)).all():
                    raise LabelError(f"{b.video_id}: bad multi label")

    def subset_classes(self, class_ids: list[int]) -> "BundleSet":
        """Keep only the listed classes, relabelling to 0..len-1 (single mode)."""
        if self.label_mode != "single":
            raise LabelError("subset_classes requires single-label data")
        remap = {c: i for i, c in enumerate(class_ids)}
        kept = [replace(b, label=remap[int(b.label)])
                for b in self.bundles if int(b.label) in remap]
        return BundleSet(
            class_text=self.class_text[np.asarray(class_ids, dtype=np.intp)].copy(),
            aux_text=self.aux_text, aux_categories=self.aux_categories,
            n_categories=self.n_categories, label_mode=self.label_mode,
            bundles=kept)


# ---------------------------------------------------------------------------
# binary file format
# ---------------------------------------------------------------------------

def write_bundle_file(path: str | Path, bundle_set: BundleSet) -> None:
    bundle_set.validate()
    records = []
    for b in bundle_set.bundles:
        label = int(b.label) if bundle_set.label_mode == "single" \
            else [int(v) for v in np.asarray(b.label)]
        records.append({"video_id": b.video_id, "n_frames": int(b.n_frames),
                        "label": label, "split": b.split})
    meta = {
        "n": bundle_set.n_classes,
        "m": bundle_set.n_aux,
        "k": bundle_set.n_categories,
        "dim": bundle_set.dim,
        "label_mode": bundle_set.label_mode,
        "aux_categories": [int(c) for c in bundle_set.aux_categories],
        "bundles": records,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<B", VERSION), struct.pack("<I", len(meta_bytes)),
             meta_bytes,
             bundle_set.class_text.astype("<f4").tobytes(),
             bundle_set.aux_text.astype("<f4").tobytes()]
    parts.extend(b.frames.astype("<f4").tobytes() for b in bundle_set.bundles)
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_bundle_file(path: str | Path) -> BundleSet:
    blob = Path(path).read_bytes()
    if len(blob) < 9:
        raise TruncationError(f"{path}: file too short for a header")
    if blob[:4] != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {blob[:4]!r}")
    version = blob[4]
    if version != VERSION:
        raise VersionError(f"{path}: unsupported bundle version {version}")
    (meta_len,) = struct.unpack_from("<I", blob, 5)
    meta_end = 9 + meta_len
    if len(blob) < meta_end + 4:
        raise TruncationError(f"{path}: metadata truncated")
    try:
        meta = json.loads(blob[9:meta_end].decode("utf-8"))
        n, m, k, dim = meta["n"], meta["m"], meta["k"], meta["dim"]
        label_mode = meta["label_mode"]
        records = meta["bundles"]
        aux_categories = np.asarray(meta["aux_categories"], dtype=np.intp)
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError) as e:
        raise ParseError(f"{path}: bad metadata ({e})") from e

    counts = [n * dim, m * dim] + [rec["n_frames"] * dim for rec in records]
    payload_len = 4 * sum(counts)
    if len(blob) != meta_end + payload_len + 4:
        raise TruncationError(f"{path}: payload length mismatch "
                              f"(expected {meta_end + payload_len + 4} bytes, "
                              f"file has {len(blob)})")
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) != crc_stored:
        raise ChecksumError(f"{path}: CRC32 mismatch")

    offset = meta_end

    def take(count: int, rows: int) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        return arr.astype(np.float32).reshape(rows, dim)

    class_text = take(n * dim, n)
    aux_text = take(m * dim, m)
    bundles = []
    for rec in records:
        frames = take(rec["n_frames"] * dim, rec["n_frames"])
        label = int(rec["label"]) if label_mode == "single" \
            else np.asarray(rec["label"], dtype=np.int64)
        bundles.append(EmbeddingBundle(video_id=rec["video_id"], frames=frames,
                                       label=label, split=rec["split"]))
    out = BundleSet(class_text=class_text, aux_text=aux_text,
                    aux_categories=aux_categories, n_categories=k,
                    label_mode=label_mode, bundles=bundles)
    out.validate()
    return out


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Drift-bearing synthetic dataset.

    Classes come in pairs that share an anchor direction: the two members
    drift within orthogonal planes through their (slightly separated)
    centers, so video means are nearly indistinguishable inside a pair
    while the frame sets are not. That makes temporal modeling load
    bearing: a pooled baseline cannot tell pair members apart.
    """

    n_classes: int = 10
    n_videos_per_class: int = 50     # includes the held-out tail
    n_test_per_class: int = 10
    n_frames: int = 8
    dim: int = 32
    separation_angle: float = 0.02   # radians between paired class centers
    noise: float = 0.3               # expected norm of per-frame perturbation
    drift: float = 0.8               # half-angle of the temporal sweep
    n_aux: int = 10
    n_categories: int = 2
    aux_drift_mix: float = 0.5       # drift-direction share in aux vectors
    multi_label: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise SpecError("need at least 2 classes")
        if self.separation_angle <= 0:
            raise SpecError("separation_angle must be > 0 for distinct centers")
        if self.noise < 0 or self.drift < 0:
            raise SpecError("noise and drift must be >= 0")
        if not 0 <= self.n_test_per_class < self.n_videos_per_class:
            raise SpecError("need 0 <= n_test_per_class < n_videos_per_class")
        if self.n_frames < 1 or self.dim < 4:
            raise SpecError("need n_frames >= 1 and dim >= 4")
        if self.n_aux > 0 and not 1 <= self.n_categories <= self.n_aux:
            raise SpecError("need 1 <= n_categories <= n_aux when n_aux > 0")


def _class_geometry(spec: SyntheticSpec, rng: Rng):
    """Unit center and drift direction per class.

    Pair p owns an anchor a_p and two orthogonal in-pair directions; class
    centers are the anchor tilted by separation_angle toward each
    direction, and each class drifts within its own (anchor, direction)
    plane. All basis vectors are orthonormalized when dim allows.
    """
    n_pairs = (spec.n_classes + 1) // 2
    need = 3 * n_pairs
    raw = rng.split("geometry").normal((spec.dim, max(need, 1)))
    if need <= spec.dim:
        basis = np.linalg.qr(raw)[0][:, :need].T
    else:  # too many classes for an orthogonal basis; fall back to random units
        basis = raw.T[:need]
        basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    centers = np.zeros((spec.n_classes, spec.dim))
    drift_dirs = np.zeros((spec.n_classes, spec.dim))
    a = spec.separation_angle
    for c in range(spec.n_classes):
        pair, member = divmod(c, 2)
        anchor = basis[3 * pair]
        direction = basis[3 * pair + 1 + member]
        centers[c] = anchor * math.cos(a) + direction * math.sin(a)
        drift_dirs[c] = direction
    return centers, drift_dirs


def generate_synthetic(spec: SyntheticSpec) -> BundleSet:
    """Deterministic bundle collection; equal specs give equal bytes."""
    rng = Rng(spec.seed)
    centers, drift_dirs = _class_geometry(spec, rng)
    a = spec.separation_angle

    # one unit aux vector per designated class subset (contiguous blocks);
    # mixing in the subset's drift directions makes the prompts visually
    # groundable against the temporal signature, not just the class center
    if spec.n_aux > 0:
        aux_rows = []
        for y in range(spec.n_aux):
            lo = (y * spec.n_classes) // spec.n_aux
            hi = max(((y + 1) * spec.n_classes) // spec.n_aux, lo + 1)
            v = (centers[lo:hi] + spec.aux_drift_mix * drift_dirs[lo:hi]).sum(axis=0)
            aux_rows.append(v / np.linalg.norm(v))
        aux_text = np.stack(aux_rows)
        aux_categories = np.asarray([y % spec.n_categories for y in range(spec.n_aux)],
                                    dtype=np.intp)
    else:
        aux_text = np.zeros((0, spec.dim))
        aux_categories = np.zeros((0,), dtype=np.intp)

    tt = spec.n_frames
    sweep = (np.linspace(-1.0, 1.0, tt) if tt > 1 else np.zeros(1)) * spec.drift
    cos_t = np.cos(sweep)[:, None]
    sin_t = np.sin(sweep)[:, None]
    bundles = []
    for c in range(spec.n_classes):
        class_rng = rng.split(f"class{c}")
        # unit vector orthogonal to the center inside its drift plane, so the
        # sweep is an exact rotation and frames stay unit length before noise
        perp = (drift_dirs[c] - math.sin(a) * centers[c]) / math.cos(a)
        for v in range(spec.n_videos_per_class):
            vid_rng = class_rng.split(f"video{v}")
            frames = centers[c] * cos_t + perp * sin_t
            if spec.noise > 0:
                frames = frames + spec.noise * vid_rng.normal((tt, spec.dim)) \
                    / math.sqrt(spec.dim)
            norms = np.linalg.norm(frames, axis=1, keepdims=True)
            if norms.min() <= NORM_GUARD:
                raise SpecError("degenerate noise produced a zero frame")
            frames = frames / norms
            label: int | np.ndarray = c
            if spec.multi_label:
                vec = np.zeros(spec.n_classes, dtype=np.int64)
                vec[c] = 1
                label = vec
            split = "train" if v < spec.n_videos_per_class - spec.n_test_per_class \
                else "test"
            bundles.append(EmbeddingBundle(
                video_id=f"synth-c{c:03d}-v{v:04d}", frames=frames,
                label=label, split=split))

    out = BundleSet(class_text=centers, aux_text=aux_text,
                    aux_categories=aux_categories,
                    n_categories=max(spec.n_categories, 1),
                    label_mode="multi" if spec.multi_label else "single",
                    bundles=bundles)
    out.validate()
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def few_shot_sample(bundle_set: BundleSet, k: int, seed: int) -> BundleSet:
    """k seeded training clips per class, disjoint from the held-out split."""
    if bundle_set.label_mode != "single":
        raise LabelError("few-shot sampling requires single-label data")
    rng = Rng(seed)
    by_class: dict[int, list[EmbeddingBundle]] = {}
    for b in bundle_set.split("train"):
        by_class.setdefault(int(b.label), []).append(b)
    chosen: list[EmbeddingBundle] = []
    for c in range(bundle_set.n_classes):
        pool = by_class.get(c, [])
        if len(pool) < k:
            raise InsufficientClipsError(
                f"class {c} has {len(pool)} training clips, need {k}")
        order = rng.split(f"class{c}").permutation(len(pool))[:k]
        chosen.extend(pool[i] for i in sorted(order))
    return BundleSet(class_text=bundle_set.class_text, aux_text=bundle_set.aux_text,
                     aux_categories=bundle_set.aux_categories,
                     n_categories=bundle_set.n_categories,
                     label_mode=bundle_set.label_mode, bundles=chosen)


def multi_view_split(bundle: EmbeddingBundle, n_views: int,
                     frames_per_view: int) -> list[EmbeddingBundle]:
    """Evenly spaced temporal windows (a single view takes the center)."""
    t = bundle.n_frames
    if n_views < 1 or frames_per_view < 1:
        raise RangeError("n_views and frames_per_view must be >= 1")
    if frames_per_view > t:
        raise RangeError(f"view of {frames_per_view} frames exceeds T={t}")
    if n_views == 1:
        starts = [(t - frames_per_view) // 2]
    else:
        span = t - frames_per_view
        starts = [round(i * span / (n_views - 1)) for i in range(n_views)]
    return [replace(bundle, video_id=f"{bundle.video_id}#view{i}",
                    frames=bundle.frames[s:s + frames_per_view])
            for i, s in enumerate(starts)]
