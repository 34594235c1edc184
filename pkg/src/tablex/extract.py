"""Extraction and cleaning of ``tabular`` snippets from LaTeX source.

The pipeline for one document is ``remove_comments`` -> ``extract_spans`` ->
``strip_noise``. ``\\verb`` groups are opaque to every stage: their contents
are never treated as comments, environments, or commands.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_documents

logger = logging.getLogger(__name__)

# \verb interiors are overwritten with this before pattern matching so that
# offsets stay aligned with the original text.
_MASK = "\x00"

_CONTROL = re.compile(r"\\(?:[A-Za-z]+|.)", re.DOTALL)
_TABULAR_EVENT = re.compile(r"\\(begin|end)\s*\{tabular\}")
_INNER_TABLE = re.compile(r"\\begin\s*\{(?:tabular\*?|tabularx|longtable)\}")
_FIGURE_EVENT = re.compile(r"\\(begin|end)\s*\{(figure\*?|subfigure)\}")
_NOISE_COMMAND = re.compile(r"\\(cite|ref|label|includegraphics)(?![A-Za-z])\*?")

BEGIN_TABULAR = "\\begin{tabular}"
END_TABULAR = "\\end{tabular}"


class SnippetError(ValueError):
    """Raised when a span cannot be cleaned into a valid snippet."""


@dataclass(frozen=True)
class RawSpan:
    start: int
    end: int
    text: str


@dataclass(frozen=True)
class TableSnippet:
    doc_id: str
    snippet_index: int
    code: str

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "snippet_index": self.snippet_index, "code": self.code}

    @classmethod
    def from_json(cls, obj: dict) -> "TableSnippet":
        return cls(obj["doc_id"], int(obj["snippet_index"]), obj["code"])


@dataclass(frozen=True)
class Diagnostic:
    doc_id: str
    reason: str
    offset: Optional[int] = None


def _line_end(text: str, i: int) -> int:
    """Index of the first line terminator at or after ``i`` (``len(text)`` if none)."""
    ends = [j for j in (text.find("\n", i), text.find("\r", i)) if j >= 0]
    return min(ends) if ends else len(text)


def _scan(text: str) -> Iterator[tuple[str, int, int]]:
    """Yield ``("verb"|"comment", start, end)`` regions in document order."""
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            m = _CONTROL.match(text, i)
            j = m.end() if m else n  # a lone trailing backslash
            if m and m.group() == "\\verb":
                k = j + 1 if text.startswith("*", j) else j
                if k < n and text[k] not in "\r\n \t":
                    close = text.find(text[k], k + 1)
                    if 0 <= close < _line_end(text, k + 1):
                        yield "verb", i, close + 1
                        i = close + 1
                        continue
            i = j
        elif ch == "%":
            end = _line_end(text, i)
            yield "comment", i, end
            i = end
        else:
            i += 1


def _mask_verbatim(text: str) -> str:
    parts, last = [], 0
    for kind, start, end in _scan(text):
        if kind != "verb":
            continue
        # keep \verb and both delimiters, blank the body
        body = start + 6 + text.startswith("*", start + 5)
        parts.append(text[last:body])
        parts.append(_MASK * (end - 1 - body))
        parts.append(text[end - 1])
        last = end
    parts.append(text[last:])
    return "".join(parts)


def remove_comments(text: str) -> str:
    """Delete every unescaped ``%`` and the rest of its line, keeping the line terminator."""
    parts, last = [], 0
    for kind, start, end in _scan(text):
        if kind == "comment":
            parts.append(text[last:start])
            last = end
    parts.append(text[last:])
    return "".join(parts)


def _warn(sink: Optional[Callable[[str, int], None]], reason: str, offset: int) -> None:
    if sink is None:
        logger.warning("%s (offset %d)", reason, offset)
    else:
        sink(reason, offset)


def extract_spans(text: str, on_warning: Optional[Callable[[str, int], None]] = None) -> list[RawSpan]:
    """Return the outermost, non-nested ``tabular`` environments of ``text``.

    ``text`` should already be comment-free. A span whose interior holds
    another table environment is discarded, as is any span left open at end
    of input; both cases are reported through ``on_warning(reason, offset)``.
    """
    masked = _mask_verbatim(text)
    spans: list[RawSpan] = []
    stack: list[int] = []
    nested = False
    for m in _TABULAR_EVENT.finditer(masked):
        if m.group(1) == "begin":
            if stack:
                nested = True
            stack.append(m.start())
            continue
        if not stack:
            _warn(on_warning, "unbalanced \\end{tabular} without a matching begin", m.start())
            continue
        start = stack.pop()
        if stack:
            continue
        end = m.end()
        if nested or _INNER_TABLE.search(masked, start + 1, end):
            _warn(on_warning, "nested table environment; snippet discarded", start)
        else:
            spans.append(RawSpan(start, end, text[start:end]))
        nested = False
    if stack:
        _warn(on_warning, "unbalanced \\begin{tabular} without a matching end; snippet discarded", stack[0])
    return spans


def _skip_space(text: str, i: int) -> int:
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def _match_group(text: str, i: int) -> int:
    """Return the index just past the group opening at ``text[i]`` (``{`` or ``[``).

    Escaped braces are not counted. ``[`` groups close at the first ``]`` at
    brace depth zero.
    """
    opener = text[i]
    closer = "}" if opener == "{" else "]"
    depth = 0
    j = i + 1 if opener == "[" else i
    while j < len(text):
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            if depth == 0:
                raise SnippetError(f"unbalanced '}}' in argument group at offset {j}")
            depth -= 1
            if opener == "{" and depth == 0:
                return j + 1
        elif ch == closer and depth == 0:
            return j + 1
        j += 1
    raise SnippetError(f"unterminated argument group at offset {i}")


def _figure_intervals(masked: str) -> list[tuple[int, int]]:
    intervals, stack = [], []
    for m in _FIGURE_EVENT.finditer(masked):
        if m.group(1) == "begin":
            stack.append((m.group(2), m.start()))
            continue
        if not stack or stack[-1][0] != m.group(2):
            raise SnippetError(f"unbalanced \\end{{{m.group(2)}}} at offset {m.start()}")
        _, start = stack.pop()
        if not stack:
            intervals.append((start, m.end()))
    if stack:
        raise SnippetError(f"unbalanced \\begin{{{stack[-1][0]}}} at offset {stack[-1][1]}")
    return intervals


def _strip_once(text: str) -> str:
    masked = _mask_verbatim(text)
    cuts = _figure_intervals(masked)

    def inside_cut(pos):
        return any(a <= pos < b for a, b in cuts)

    for m in _NOISE_COMMAND.finditer(masked):
        if inside_cut(m.start()):
            continue
        j = m.end()
        k = _skip_space(masked, j)
        while k < len(masked) and masked[k] == "[":
            j = _match_group(masked, k)
            k = _skip_space(masked, j)
        if k >= len(masked) or masked[k] != "{":
            raise SnippetError(f"\\{m.group(1)} without an argument group at offset {m.start()}")
        end = _match_group(masked, k)
        start = m.start()
        if start > 0 and masked[start - 1] == "~":
            start -= 1
        cuts.append((start, end))

    if not cuts:
        return text
    cuts.sort()
    parts, last = [], 0
    for a, b in cuts:
        if a < last:  # overlapping match already removed
            a = last
        parts.append(text[last:a])
        last = max(last, b)
    parts.append(text[last:])
    return "".join(parts)


def strip_noise(span: str) -> str:
    """Remove citations, references, labels, graphics and figure environments.

    ``\\cite``, ``\\ref``, ``\\label`` and ``\\includegraphics`` are deleted
    together with optional ``[...]`` groups, their ``{...}`` argument and one
    directly preceding ``~``. ``figure``/``subfigure`` environments are
    deleted with their contents. Everything else is preserved unchanged.

    Raises:
        SnippetError: a stripped command has a malformed argument group, or a
            figure environment is unbalanced.
    """
    out = span
    while True:
        nxt = _strip_once(out)
        if nxt == out:
            return out
        out = nxt


def _braces_balanced(code: str) -> bool:
    depth = 0
    i = 0
    while i < len(code):
        ch = code[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
        i += 1
    return depth == 0


def snippet_violations(code: str) -> list[str]:
    """List the ways ``code`` fails to be a clean snippet (empty when valid)."""
    problems = []
    if not code.startswith(BEGIN_TABULAR):
        problems.append("does not begin with \\begin{tabular}")
    if not code.endswith(END_TABULAR):
        problems.append("does not end with \\end{tabular}")
    masked = _mask_verbatim(code)
    if not _braces_balanced(masked):
        problems.append("unbalanced braces")
    for needle in ("\\cite{", "\\ref{", "\\label{", "\\includegraphics"):
        if needle in masked:
            problems.append(f"contains {needle}")
    if _FIGURE_EVENT.search(masked):
        problems.append("contains a figure environment")
    if _INNER_TABLE.search(masked, 1):
        problems.append("contains a nested table environment")
    if any(kind == "comment" for kind, _, _ in _scan(code)):
        problems.append("contains comment text")
    return problems


def extract_snippets(
    text: str, doc_id: str, diagnostics: Optional[list[Diagnostic]] = None
) -> list[TableSnippet]:
    """Run the full cleaning pipeline over one document's text."""
    sink = diagnostics if diagnostics is not None else []

    def record(reason, offset=None):
        sink.append(Diagnostic(doc_id, reason, offset))
        logger.warning("%s: %s", doc_id, reason)

    snippets = []
    for span in extract_spans(remove_comments(text), on_warning=record):
        try:
            code = strip_noise(span.text)
        except SnippetError as exc:
            record(f"snippet rejected: {exc}", span.start)
            continue
        problems = snippet_violations(code)
        if problems:
            record("snippet rejected: " + "; ".join(problems), span.start)
            continue
        snippets.append(TableSnippet(doc_id, len(snippets), code))
    return snippets


class TableExtractor(TransformerMixin, BaseEstimator):
    """Turn documents into cleaned :class:`TableSnippet` records.

    Stateless; ``fit`` is a no-op kept for pipeline composition. Rejections
    from the last ``transform`` call are kept in ``diagnostics_``.
    """

    def fit(self, X, y=None):
        check_documents(X)
        return self

    def transform(self, X) -> list[TableSnippet]:
        self.diagnostics_: list[Diagnostic] = []
        out: list[TableSnippet] = []
        for doc in check_documents(X):
            out.extend(extract_snippets(doc.text, doc.doc_id, self.diagnostics_))
        return out

    def fit_transform(self, X, y=None, **fit_params) -> list[TableSnippet]:
        # read X once so one-shot iterables such as scan_corpus() work
        return self.transform(check_documents(X))


def iter_snippets(docs: Iterable, diagnostics: Optional[list[Diagnostic]] = None) -> Iterator[TableSnippet]:
    for doc in docs:
        yield from extract_snippets(doc.text, doc.doc_id, diagnostics)
