"""Assemble the TSD/TCD dataset variants, split them, and summarise them."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .render import RenderedImage
from .tokenize import ALIGNMENTS, CONTENT, ROW_END, STRUCTURE, TokenStream

VARIANTS = {
    "TSD-250": (STRUCTURE, 250),
    "TSD-500": (STRUCTURE, 500),
    "TCD-250": (CONTENT, 250),
    "TCD-500": (CONTENT, 500),
}
SPLITS = ("train", "val", "test")
_TRAIN, _VAL = 0.8, 0.9
BUCKET_WIDTH = 25


class IntegrityError(ValueError):
    """A manifest references data that is missing or inconsistent."""


def split_fraction(doc_id: str, snippet_index: int) -> float:
    digest = hashlib.sha256(f"{doc_id}\x1f{snippet_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def assign_split(doc_id: str, snippet_index: int) -> str:
    """Deterministic 80/10/10 split keyed on the snippet, so every rendering of it lands together."""
    u = split_fraction(doc_id, snippet_index)
    if u < _TRAIN:
        return "train"
    if u < _VAL:
        return "val"
    return "test"


def table_shape(structure: Sequence[str]) -> tuple[int, int]:
    """``(rows, columns)`` of a structure stream: row ends and alignment tokens of the column spec."""
    rows = sum(t == ROW_END for t in structure)
    cols = 0
    if structure and structure[0] == "{":
        for t in structure[1:]:
            if t == "}":
                break
            cols += t in ALIGNMENTS
    return rows, cols


@dataclass
class ManifestEntry:
    sample_id: str
    doc_id: str
    snippet_index: int
    split: str
    tokens: Optional[list[str]]
    image: Optional[str] = None
    font: Optional[str] = None
    aspect: Optional[str] = None
    rows: Optional[int] = None
    cols: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "doc_id": self.doc_id,
            "snippet_index": self.snippet_index,
            "font": self.font,
            "aspect": self.aspect,
            "image": self.image,
            "split": self.split,
            "rows": self.rows,
            "cols": self.cols,
            "tokens": self.tokens,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        return cls(
            obj["sample_id"], obj["doc_id"], int(obj["snippet_index"]), obj["split"], obj.get("tokens"),
            obj.get("image"), obj.get("font"), obj.get("aspect"), obj.get("rows"), obj.get("cols"),
        )


@dataclass
class DatasetStats:
    samples: int = 0
    tokens_per_sample: float = 0.0
    vocab_size: int = 0
    avg_rows: float = 0.0
    avg_cols: float = 0.0
    split_counts: dict = field(default_factory=lambda: dict.fromkeys(SPLITS, 0))

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "tokens_per_sample": self.tokens_per_sample,
            "vocab_size": self.vocab_size,
            "avg_rows": self.avg_rows,
            "avg_cols": self.avg_cols,
            "split_counts": dict(self.split_counts),
        }


@dataclass
class DatasetManifest:
    variant: str
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return VARIANTS[self.variant][0]

    @property
    def cap(self) -> int:
        return VARIANTS[self.variant][1]

    def ground_truths(self) -> dict[str, list[str]]:
        return {e.sample_id: e.tokens for e in self.entries}


def build_manifest(
    variant: str,
    structure_streams: Iterable[TokenStream],
    content_streams: Iterable[TokenStream] = (),
    renders: Optional[Iterable[RenderedImage]] = None,
) -> DatasetManifest:
    """Pair each surviving ground-truth stream with its rendered images.

    Streams longer than the variant cap are dropped. When ``renders`` is
    ``None`` (no render stage) each stream becomes one image-less entry;
    otherwise one entry per successful render, and snippets whose renders
    all failed are left out. Row/column counts always come from the
    structure stream of the same snippet, when it exists.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {list(VARIANTS)}")
    kind, cap = VARIANTS[variant]
    structure = {s.key: s for s in structure_streams}
    content = {s.key: s for s in content_streams}
    streams = structure if kind == STRUCTURE else content

    images: dict[tuple[str, int], list[RenderedImage]] = {}
    if renders is not None:
        for r in renders:
            if r.ok:
                images.setdefault((r.doc_id, r.snippet_index), []).append(r)

    entries = []
    for key in sorted(streams):
        stream = streams[key]
        if len(stream.tokens) > cap:
            continue
        rows = cols = None
        if key in structure:
            rows, cols = table_shape(structure[key].tokens)
        split = assign_split(*key)
        if renders is None:
            entries.append(ManifestEntry(f"{key[0]}/{key[1]}", key[0], key[1], split, list(stream.tokens),
                                         rows=rows, cols=cols))
            continue
        for r in sorted(images.get(key, ()), key=lambda r: (r.font_package, r.aspect_mode)):
            entries.append(ManifestEntry(r.sample_id, key[0], key[1], split, list(stream.tokens),
                                         image=r.path, font=r.font_package, aspect=r.aspect_mode,
                                         rows=rows, cols=cols))
    return DatasetManifest(variant, entries)


def build_variants(structure_streams, content_streams, renders=None, variants=tuple(VARIANTS)) -> dict[str, DatasetManifest]:
    structure_streams, content_streams = list(structure_streams), list(content_streams)
    renders = None if renders is None else list(renders)
    return {v: build_manifest(v, structure_streams, content_streams, renders) for v in variants}


def _mean(values: list) -> float:
    return sum(values) / len(values) if values else 0.0


def compute_stats(manifest: DatasetManifest) -> DatasetStats:
    """Table-level summary of a manifest; independent of entry order.

    Raises:
        IntegrityError: an entry has no token stream.
    """
    stats = DatasetStats()
    lengths, rows, cols = [], [], []
    vocab: set[str] = set()
    for e in manifest.entries:
        if e.tokens is None:
            raise IntegrityError(f"{e.sample_id}: manifest entry has no token stream")
        lengths.append(len(e.tokens))
        vocab.update(e.tokens)
        if manifest.kind == STRUCTURE:
            r, c = table_shape(e.tokens)
        else:
            r, c = e.rows, e.cols
        if r is not None:
            rows.append(r)
            cols.append(c)
        stats.split_counts[e.split] = stats.split_counts.get(e.split, 0) + 1
    stats.samples = len(lengths)
    stats.tokens_per_sample = _mean(lengths)
    stats.vocab_size = len(vocab)
    stats.avg_rows = _mean(rows)
    stats.avg_cols = _mean(cols)
    return stats


def token_length_histogram(manifest, width: int = BUCKET_WIDTH, cap: Optional[int] = None) -> dict[tuple[int, int], int]:
    """Counts of stream lengths in ``width``-token buckets ``[lo, lo + width)``.

    Accepts a manifest (cap taken from its variant) or a plain list of
    lengths. The last bucket below the cap also holds lengths equal to the
    cap. Only non-empty buckets are returned, in ascending order.
    """
    if isinstance(manifest, DatasetManifest):
        lengths = [len(e.tokens) for e in manifest.entries]
        cap = manifest.cap if cap is None else cap
    else:
        lengths = list(manifest)
    last = None if cap is None else max(0, (cap - 1) // width * width)
    counts: Counter = Counter()
    for n in lengths:
        if cap is not None and n > cap:
            raise IntegrityError(f"stream of length {n} exceeds cap {cap}")
        lo = n // width * width
        if last is not None:
            lo = min(lo, last)
        counts[lo] += 1
    return {(lo, lo + width): counts[lo] for lo in sorted(counts)}


def format_stats_table(manifests: dict[str, DatasetManifest]) -> str:
    """Plain-text summary with one row per variant."""
    header = ("Dataset", "ML", "Samples", "Train/Val/Test", "T/S", "VS", "AR", "AC")
    rows = [header]
    for name, manifest in manifests.items():
        s = compute_stats(manifest)
        sc = s.split_counts
        rows.append((
            name, str(manifest.cap), str(s.samples),
            f"{sc.get('train', 0)} / {sc.get('val', 0)} / {sc.get('test', 0)}",
            f"{s.tokens_per_sample:.2f}", str(s.vocab_size), f"{s.avg_rows:.2f}", f"{s.avg_cols:.2f}",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_histogram(hist: dict[tuple[int, int], int]) -> str:
    return "".join(f"[{lo},{hi})\t{n}\n" for (lo, hi), n in hist.items())
