"""Ground-truth token streams for table structure and table content.

Both streams are rendered from one parse of the snippet body:

* the structure stream keeps the column specification, rule commands, cell
  separators and row ends, and replaces every non-empty cell with ``CELL``;
* the content stream drops all table machinery and spells out cell contents
  one character (or one command) per token, with ``¦`` at word boundaries.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_snippets
from .extract import BEGIN_TABULAR, END_TABULAR, TableSnippet

STRUCTURE = "structure"
CONTENT = "content"

CELL = "CELL"
ROW_END = "\\\\"
DELIMITER = "¦"
RARE_TOKEN = "\\LATEX_TOKEN"
#: Internal word-boundary marker produced by :func:`lex`; never emitted in a stream.
WB = " "

RULES = ("\\hline", "\\toprule", "\\midrule", "\\bottomrule")
ALIGNMENTS = ("l", "r", "c")
STRUCTURE_VOCABULARY = frozenset(
    [str(d) for d in range(10)]
    + ["&", CELL, ROW_END, *RULES, "\\multicolumn", "\\multirow", "|", *ALIGNMENTS, "{", "}"]
)

# Partial-rule and spacing commands with no structure token. Value: count of
# mandatory {} arguments; optional [] and () groups are skipped as well.
_DROPPED_RULES = {
    "\\cline": 1,
    "\\cmidrule": 1,
    "\\cdashline": 1,
    "\\hhline": 1,
    "\\hdashline": 0,
    "\\addlinespace": 0,
    "\\morecmidrules": 0,
    "\\specialrule": 3,
    "\\noalign": 1,
}

_LEX = re.compile(r"(\\[A-Za-z]+)|(\\\\)|(\s+)|(.)", re.DOTALL)
_COMMAND = re.compile(r"\\[A-Za-z]+")


class StructureError(ValueError):
    """The snippet cannot be expressed in the structure vocabulary."""


def is_command(token: str) -> bool:
    return _COMMAND.fullmatch(token) is not None


def lex(code: str) -> list[str]:
    """Split LaTeX into command, row-terminator and single-character tokens.

    Whitespace runs become a single :data:`WB` marker.
    """
    out = []
    for m in _LEX.finditer(code):
        out.append(WB if m.group(3) is not None else m.group())
    return out


# --- parse tree ---------------------------------------------------------


@dataclass
class Multi:
    command: str  # \multicolumn or \multirow
    count: list[str]
    spec: list[str]
    content: list  # cell parts


@dataclass
class Rule:
    name: str


@dataclass
class Cell:
    parts: list = field(default_factory=list)  # str tokens and Multi

    def is_empty(self) -> bool:
        return all(p == WB for p in self.parts)


class _Sep:
    pass


class _RowEnd:
    pass


SEP, ROW = _Sep(), _RowEnd()


@dataclass
class ParsedTable:
    column_spec: Optional[list[str]]
    body: list  # Rule | Cell | SEP | ROW


def _skip_wb(toks: Sequence[str], i: int) -> int:
    while i < len(toks) and toks[i] == WB:
        i += 1
    return i


def _read_group(toks: Sequence[str], i: int, opener: str = "{") -> tuple[list[str], int]:
    """Read a balanced group starting at ``toks[i] == opener``; return (interior, next index)."""
    closer = {"{": "}", "[": "]", "(": ")"}[opener]
    if i >= len(toks) or toks[i] != opener:
        raise StructureError(f"expected '{opener}'")
    depth = 0
    j = i + 1
    while j < len(toks):
        t = toks[j]
        if t == "\\":
            j += 2
            continue
        if t == "{":
            depth += 1
        elif t == "}" and depth > 0:
            depth -= 1
        elif t == closer and depth == 0:
            return list(toks[i + 1 : j]), j + 1
        j += 1
    raise StructureError(f"unterminated '{opener}' group")


def _skip_optionals(toks: Sequence[str], i: int, openers: str = "[") -> int:
    while True:
        k = _skip_wb(toks, i)
        if k < len(toks) and toks[k] in openers:
            _, i = _read_group(toks, k, toks[k])
        else:
            return i


def _mandatory(toks: Sequence[str], i: int) -> tuple[list[str], int]:
    return _read_group(toks, _skip_wb(toks, i), "{")


def parse_column_spec(toks: Sequence[str]) -> list[str]:
    """Reduce a column specification to ``l``/``r``/``c``/``|`` tokens.

    ``*{n}{...}`` repetitions are expanded. Anything else (``p{..}``,
    ``@{..}``, ``>{..}``, ...) raises :class:`StructureError`.
    """
    out: list[str] = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if t == WB:
            i += 1
        elif t in ALIGNMENTS or t == "|":
            out.append(t)
            i += 1
        elif t == "*":
            count, i = _mandatory(toks, i + 1)
            inner, i = _mandatory(toks, i)
            n = "".join(c for c in count if c != WB)
            if not n.isdigit():
                raise StructureError("unsupported column spec")
            out.extend(parse_column_spec(inner) * int(n))
        else:
            raise StructureError("unsupported column spec")
    return out


def _parse_multi(toks: Sequence[str], i: int, command: str) -> tuple[Multi, int]:
    """Parse the arguments of ``\\multicolumn``/``\\multirow`` starting after the command."""
    if command == "\\multicolumn":
        count, i = _mandatory(toks, i)
        spec_toks, i = _mandatory(toks, i)
        spec = list(spec_toks)
    else:
        i = _skip_optionals(toks, i)
        count, i = _mandatory(toks, i)
        i = _skip_optionals(toks, i)
        spec, i = _mandatory(toks, i)  # width argument
        i = _skip_optionals(toks, i)
    content, i = _mandatory(toks, i)
    return Multi(command, [c for c in count if c != WB], spec, _parse_cell_parts(content)), i


def _parse_cell_parts(toks: Sequence[str]) -> list:
    parts: list = []
    depth = 0
    i = 0
    while i < len(toks):
        t = toks[i]
        if t == "\\" and i + 1 < len(toks):
            parts.extend(toks[i : i + 2])
            i += 2
            continue
        if depth == 0 and t in ("\\multicolumn", "\\multirow"):
            try:
                multi, i = _parse_multi(toks, i + 1, t)
            except StructureError:
                parts.append(t)
                i += 1
            else:
                parts.append(multi)
            continue
        if t == "{":
            depth += 1
        elif t == "}" and depth > 0:
            depth -= 1
        parts.append(t)
        i += 1
    return parts


def parse_table(code: str) -> ParsedTable:
    """Parse a snippet into its column spec and a flat body of rules, cells, separators and row ends."""
    code = code.strip()
    if not (code.startswith(BEGIN_TABULAR) and code.endswith(END_TABULAR)):
        raise StructureError("not a tabular snippet")
    toks = lex(code[len(BEGIN_TABULAR) : len(code) - len(END_TABULAR)])

    try:
        i = _skip_optionals(toks, 0)  # vertical position [t]/[b]/[c]
    except StructureError:
        i = 0
    column_spec = None
    k = _skip_wb(toks, i)
    if k < len(toks) and toks[k] == "{":
        column_spec, i = _read_group(toks, k)

    body: list = []
    cell: list[str] = []
    depth = env = 0

    def flush():
        body.append(Cell(_parse_cell_parts(cell)))
        cell.clear()

    while i < len(toks):
        t = toks[i]
        top = depth == 0 and env == 0
        if t == "\\" and i + 1 < len(toks):
            cell.extend(toks[i : i + 2])
            i += 2
            continue
        if top and t == "&":
            flush()
            body.append(SEP)
            i += 1
        elif top and t in (ROW_END, "\\tabularnewline"):
            flush()
            body.append(ROW)
            i += 1
            k = _skip_wb(toks, i)
            if k < len(toks) and toks[k] == "*":
                i = k + 1
            k = _skip_wb(toks, i)
            if k < len(toks) and toks[k] == "[" and "]" in toks[k:]:
                _, i = _read_group(toks, k, "[")
        elif top and t in RULES:
            body.append(Rule(t))
            i = _skip_optionals(toks, i + 1, "[(")
        elif top and t in _DROPPED_RULES:
            try:
                j = _skip_optionals(toks, i + 1, "[(")
                for _ in range(_DROPPED_RULES[t]):
                    _, j = _mandatory(toks, j)
                    j = _skip_optionals(toks, j, "[(")
            except StructureError:
                cell.append(t)  # malformed: keep as cell text
                i += 1
            else:
                i = j
        else:
            if t == "{":
                depth += 1
            elif t == "}" and depth > 0:
                depth -= 1
            elif t == "\\begin":
                env += 1
            elif t == "\\end" and env > 0:
                env -= 1
            cell.append(t)
            i += 1
    if cell and not all(t == WB for t in cell):
        flush()
    return ParsedTable(column_spec, body)


# --- stream rendering ---------------------------------------------------


@dataclass
class TokenStream:
    kind: str
    tokens: list[str]
    doc_id: str = ""
    snippet_index: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.snippet_index)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "snippet_index": self.snippet_index,
            "kind": self.kind,
            "tokens": list(self.tokens),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TokenStream":
        return cls(obj["kind"], list(obj["tokens"]), obj["doc_id"], int(obj["snippet_index"]))


def _structure_cell(parts: list) -> list[str]:
    for p in parts:
        if isinstance(p, Multi):
            return _structure_multi(p)
    if all(p == WB for p in parts):
        return []
    return [CELL]


def _structure_multi(m: Multi) -> list[str]:
    if not m.count or not all(c.isdigit() for c in m.count):
        raise StructureError(f"unsupported {m.command} count")
    out = [m.command, "{", *"".join(m.count), "}"]
    if m.command == "\\multicolumn":
        out += ["{", *parse_column_spec(m.spec), "}"]
    return out + ["{", *_structure_cell(m.content), "}"]


def structure_tokens(code: str) -> list[str]:
    """Structure-vocabulary tokens for one snippet.

    Raises:
        StructureError: unsupported column spec or malformed spanning cell.
    """
    table = parse_table(code)
    if table.column_spec is None:
        raise StructureError("missing column spec")
    out = ["{", *parse_column_spec(table.column_spec), "}"]
    for item in table.body:
        if isinstance(item, Rule):
            out.append(item.name)
        elif isinstance(item, Cell):
            for p in item.parts:
                if isinstance(p, str) and p in ("\\multicolumn", "\\multirow"):
                    raise StructureError(f"malformed {p}")
            out.extend(_structure_cell(item.parts))
        elif item is SEP:
            out.append("&")
        else:
            out.append(ROW_END)
    return out


def _flatten_content(parts: list) -> list[str]:
    out = []
    for p in parts:
        if isinstance(p, Multi):
            out.extend(_flatten_content(p.content))
        else:
            out.append(p)
    return out


def _content_cell(parts: list) -> list[str]:
    out: list[str] = []
    for t in _flatten_content(parts):
        if t == WB:
            if out and out[-1] != DELIMITER:
                out.append(DELIMITER)
        else:
            out.append(ROW_END if t == "\\tabularnewline" else t)
    if out and out[-1] == DELIMITER:
        out.pop()
    return out


def content_tokens(code: str) -> list[str]:
    """Character-level content tokens for one snippet; never raises on a valid snippet."""
    try:
        table = parse_table(code)
    except StructureError:
        return []
    out = []
    for item in table.body:
        if isinstance(item, Cell):
            out.extend(_content_cell(item.parts))
        elif item is SEP:
            out.append("&")
        elif item is ROW:
            out.append(ROW_END)
    return out


def to_structure_stream(snippet: Union[TableSnippet, str]) -> TokenStream:
    if isinstance(snippet, str):
        snippet = TableSnippet("", 0, snippet)
    return TokenStream(STRUCTURE, structure_tokens(snippet.code), snippet.doc_id, snippet.snippet_index)


def to_content_stream(snippet: Union[TableSnippet, str]) -> TokenStream:
    if isinstance(snippet, str):
        snippet = TableSnippet("", 0, snippet)
    return TokenStream(CONTENT, content_tokens(snippet.code), snippet.doc_id, snippet.snippet_index)


# --- vocabularies and corpus filters ------------------------------------


@dataclass
class Vocabulary:
    kind: str
    counts: dict[str, int]

    def __len__(self) -> int:
        return len(self.counts)

    def __contains__(self, token: str) -> bool:
        return token in self.counts

    @classmethod
    def from_streams(cls, kind: str, streams: Iterable[TokenStream]) -> "Vocabulary":
        counts: Counter = Counter()
        for s in streams:
            counts.update(s.tokens)
        return cls(kind, dict(counts))

    def sorted_items(self) -> list[tuple[str, int]]:
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def to_tsv(self) -> str:
        return "".join(f"{tok}\t{n}\n" for tok, n in self.sorted_items())

    @classmethod
    def from_tsv(cls, kind: str, text: str) -> "Vocabulary":
        counts = {}
        for line in text.splitlines():
            if line:
                tok, _, n = line.rpartition("\t")
                counts[tok] = int(n)
        return cls(kind, counts)


def command_counts(streams: Iterable[TokenStream]) -> Counter:
    """Corpus frequency of command tokens; partial counts from shards can be summed."""
    counts: Counter = Counter()
    for s in streams:
        counts.update(t for t in s.tokens if is_command(t))
    return counts


def replace_rare(stream: TokenStream, counts: Counter, threshold: int) -> TokenStream:
    tokens = [
        RARE_TOKEN if is_command(t) and counts.get(t, 0) < threshold else t
        for t in stream.tokens
    ]
    return TokenStream(stream.kind, tokens, stream.doc_id, stream.snippet_index)


def filter_rare(streams: Sequence[TokenStream], threshold: int = 5000) -> tuple[list[TokenStream], Vocabulary]:
    """Replace commands seen fewer than ``threshold`` times in the corpus with ``\\LATEX_TOKEN``."""
    counts = command_counts(streams)
    rewritten = [replace_rare(s, counts, threshold) for s in streams]
    kind = streams[0].kind if streams else CONTENT
    return rewritten, Vocabulary.from_streams(kind, rewritten)


def length_filter(stream: TokenStream, cap: int) -> bool:
    """Keep decision for a dataset variant capped at ``cap`` tokens (inclusive)."""
    return len(stream.tokens) <= cap


# --- estimators ---------------------------------------------------------


@dataclass(frozen=True)
class Rejection:
    doc_id: str
    snippet_index: int
    reason: str


class StructureTokenizer(TransformerMixin, BaseEstimator):
    """Map snippets to structure streams.

    Snippets outside the structure vocabulary are dropped from the output and
    listed in ``rejected_``. ``fit`` records the corpus vocabulary.
    """

    def fit(self, X, y=None):
        self.vocabulary_ = Vocabulary.from_streams(STRUCTURE, self.transform(X))
        return self

    def transform(self, X) -> list[TokenStream]:
        self.rejected_: list[Rejection] = []
        out = []
        for snip in check_snippets(X):
            try:
                out.append(to_structure_stream(snip))
            except StructureError as exc:
                self.rejected_.append(Rejection(snip.doc_id, snip.snippet_index, str(exc)))
        return out

    def fit_transform(self, X, y=None, **fit_params) -> list[TokenStream]:
        out = self.transform(X)
        self.vocabulary_ = Vocabulary.from_streams(STRUCTURE, out)
        return out


class ContentTokenizer(TransformerMixin, BaseEstimator):
    """Map snippets to content streams with rare-command replacement.

    ``fit`` counts command tokens over the corpus; ``transform`` replaces
    every command whose fitted count is below ``threshold`` (commands never
    seen during ``fit`` count as zero).

    Parameters
    ----------
    threshold : int, default=5000
        Minimum corpus frequency for a command token to be kept verbatim.
    """

    def __init__(self, threshold: int = 5000):
        self.threshold = threshold

    def _raw(self, X):
        return [to_content_stream(s) for s in check_snippets(X)]

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def _fit_raw(self, raw):
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        self.command_counts_ = command_counts(raw)
        self.rare_commands_ = sorted(t for t, n in self.command_counts_.items() if n < self.threshold)
        return raw

    def transform(self, X) -> list[TokenStream]:
        check_is_fitted(self, "command_counts_")
        return [replace_rare(s, self.command_counts_, self.threshold) for s in self._raw(X)]

    def fit_transform(self, X, y=None, **fit_params) -> list[TokenStream]:
        raw = self._fit_raw(self._raw(X))
        out = [replace_rare(s, self.command_counts_, self.threshold) for s in raw]
        self.vocabulary_ = Vocabulary.from_streams(CONTENT, out)
        return out


class LengthFilter(TransformerMixin, BaseEstimator):
    """Drop streams longer than ``cap`` tokens."""

    def __init__(self, cap: int = 250):
        self.cap = cap

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[TokenStream]:
        return [s for s in X if length_filter(s, self.cap)]
