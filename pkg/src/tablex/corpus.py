"""Enumerate LaTeX sources under a corpus root."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

logger = logging.getLogger(__name__)

DEFAULT_MAX_BYTES = 10 * 1024 * 1024
CATEGORIES_FILE = "categories.tsv"
UNKNOWN_CATEGORY = "unknown"


@dataclass(frozen=True)
class TexDocument:
    doc_id: str
    text: str
    byte_len: int
    category: Optional[str] = None


def load_categories(path: Path) -> dict[str, str]:
    """Read a ``doc_id<TAB>category`` sidecar. Blank lines and ``#`` lines are skipped."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            doc_id, sep, category = line.partition("\t")
            if not sep or not category:
                logger.warning("%s:%d: malformed category line", path, lineno)
                continue
            labels[doc_id] = category
    return labels


def _warn_skip(path: Path, reason: str) -> None:
    logger.warning("skipping %s: %s", path, reason)


def scan_corpus(
    root,
    max_bytes: int = DEFAULT_MAX_BYTES,
    on_skip: Optional[Callable[[Path, str], None]] = None,
) -> Iterator[TexDocument]:
    """Yield one :class:`TexDocument` per ``.tex`` file under ``root``.

    Files are visited in lexicographic order of their POSIX relative path, so
    two scans of an unchanged tree produce identical streams. Files larger
    than ``max_bytes`` or that cannot be read are reported through
    ``on_skip(path, reason)`` (default: a logged warning) and skipped.

    Raises:
        NotADirectoryError: ``root`` is not a readable directory.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"corpus root is not a directory: {root}")
    on_skip = on_skip or _warn_skip

    categories: dict[str, str] = {}
    sidecar = root / CATEGORIES_FILE
    if sidecar.is_file():
        categories = load_categories(sidecar)

    # rglob does not raise on unreadable subdirectories; it just skips them
    candidates = [
        (p.relative_to(root).as_posix(), p)
        for p in root.rglob("*")
        if p.suffix.lower() == ".tex" and p.is_file()
    ]
    candidates.sort(key=lambda item: item[0])

    for doc_id, path in candidates:
        try:
            size = path.stat().st_size
            if size > max_bytes:
                on_skip(path, f"size {size} exceeds max_bytes {max_bytes}")
                continue
            raw = path.read_bytes()
        except OSError as exc:
            on_skip(path, f"unreadable: {exc}")
            continue
        yield TexDocument(
            doc_id=doc_id,
            text=raw.decode("utf-8", errors="replace"),
            byte_len=len(raw),
            category=categories.get(doc_id),
        )


def category_histogram(docs: Iterable[TexDocument]) -> dict[str, int]:
    counts = Counter(doc.category or UNKNOWN_CATEGORY for doc in docs)
    return dict(sorted(counts.items()))
