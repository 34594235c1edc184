"""Exact match accuracy, corpus BLEU-4 and word error rate over token sequences."""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Sequence

from rapidfuzz.distance import Levenshtein

from ._validation import check_token_sequence

MAX_ORDER = 4


class IntegrityError(ValueError):
    """Predictions and ground truth cannot be aligned."""


def _align(predictions, ground_truths) -> list[tuple[list[str], list[str]]]:
    """Pair predictions with references, by key for mappings or by position otherwise."""
    if isinstance(predictions, Mapping) and isinstance(ground_truths, Mapping):
        pairs = []
        for sample_id, pred in predictions.items():
            if sample_id not in ground_truths:
                raise IntegrityError(f"prediction for unknown sample_id {sample_id!r}")
            pairs.append((check_token_sequence(pred, sample_id), check_token_sequence(ground_truths[sample_id], sample_id)))
        return pairs
    predictions, ground_truths = list(predictions), list(ground_truths)
    if len(predictions) != len(ground_truths):
        raise IntegrityError(f"{len(predictions)} predictions for {len(ground_truths)} references")
    return [(check_token_sequence(p), check_token_sequence(g)) for p, g in zip(predictions, ground_truths)]


def ema(predictions, ground_truths) -> float:
    """Fraction of predictions whose token sequence equals the reference exactly."""
    pairs = _align(predictions, ground_truths)
    if not pairs:
        raise ValueError("ema needs at least one prediction")
    return sum(p == g for p, g in pairs) / len(pairs)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost Levenshtein distance between two sequences of hashable tokens."""
    return Levenshtein.distance(list(a), list(b))


def wer(prediction: Sequence[str], ground_truth: Sequence[str]) -> float:
    """Token-level edit distance divided by the reference length."""
    if len(ground_truth) == 0:
        raise ValueError("wer is undefined for an empty ground truth")
    return edit_distance(prediction, ground_truth) / len(ground_truth)


def corpus_wer(predictions, ground_truths) -> float:
    """Total edit distance over total reference length."""
    pairs = _align(predictions, ground_truths)
    total = sum(len(g) for _, g in pairs)
    if total == 0:
        raise ValueError("wer is undefined for an empty ground truth")
    return sum(edit_distance(p, g) for p, g in pairs) / total


# --- BLEU ---------------------------------------------------------------

_13A_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


def tokenize_13a(line: str) -> list[str]:
    """mteval-v13a word splitting, as applied by common BLEU scorers to raw text."""
    line = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    if "&" in line:
        line = line.replace("&quot;", '"').replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">")
    line = f" {line} "
    for pattern, repl in _13A_RULES:
        line = pattern.sub(repl, line)
    return line.split()


def _bleu_atoms(tokens: list[str], tokenize: str) -> list[str]:
    if tokenize == "none":
        return tokens
    if tokenize == "13a":
        return tokenize_13a(" ".join(tokens))
    raise ValueError(f"unknown tokenize mode {tokenize!r}")


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    """Sufficient statistics for corpus BLEU; add instances to merge shards."""

    matches: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    @classmethod
    def from_pair(cls, hyp: Sequence[str], ref: Sequence[str]) -> "BleuStats":
        stats = cls(hyp_len=len(hyp), ref_len=len(ref))
        for n in range(1, MAX_ORDER + 1):
            h, r = ngram_counts(hyp, n), ngram_counts(ref, n)
            stats.matches[n - 1] = sum(min(c, r[g]) for g, c in h.items())
            stats.totals[n - 1] = max(len(hyp) - n + 1, 0)
        return stats

    def score(self, smooth: str = "exp") -> float:
        if self.hyp_len == 0 or not any(self.matches):
            return 0.0
        bp = 1.0 if self.hyp_len >= self.ref_len else math.exp(1 - self.ref_len / self.hyp_len)
        log_sum = 0.0
        divisor = 1.0
        for m, t in zip(self.matches, self.totals):
            if t == 0:
                return 0.0
            if m > 0:
                log_sum += math.log(m / t)
            elif smooth == "exp":
                divisor *= 2
                log_sum += math.log(1 / (divisor * t))
            elif smooth == "none":
                return 0.0
            else:
                raise ValueError(f"unknown smoothing {smooth!r}")
        return 100.0 * bp * math.exp(log_sum / MAX_ORDER)


def bleu4(predictions, ground_truths, smooth: str = "exp", tokenize: str = "none") -> float:
    """Corpus BLEU-4 in [0, 100].

    Args:
        smooth: ``"exp"`` halves the pseudo-count of each successive order
            with no matches; ``"none"`` returns 0 whenever an order has no
            matches.
        tokenize: ``"none"`` scores the given tokens as atomic words;
            ``"13a"`` joins them with spaces and re-splits with the
            mteval-v13a rules first.
    """
    pairs = _align(predictions, ground_truths)
    if not pairs:
        raise ValueError("bleu4 needs at least one prediction")
    stats = BleuStats()
    for p, g in pairs:
        stats = stats + BleuStats.from_pair(_bleu_atoms(p, tokenize), _bleu_atoms(g, tokenize))
    return stats.score(smooth)


def sentence_bleu4(prediction, ground_truth, smooth: str = "exp", tokenize: str = "none") -> float:
    return bleu4([prediction], [ground_truth], smooth=smooth, tokenize=tokenize)


# --- reports ------------------------------------------------------------


@dataclass
class SampleScore:
    sample_id: str
    exact_match: bool
    wer: float


@dataclass
class EvalReport:
    n: int
    ema: float | None = None
    bleu4: float | None = None
    wer: float | None = None
    per_sample: list[SampleScore] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ema": self.ema,
            "bleu4": self.bleu4,
            "wer": self.wer,
            "per_sample": [vars(s) for s in self.per_sample],
        }

    def summary(self) -> str:
        lines = [f"samples  {self.n}"]
        if self.ema is not None:
            lines.append(f"EMA      {self.ema * 100:.2f}%")
        if self.bleu4 is not None:
            lines.append(f"BLEU-4   {self.bleu4:.2f}")
        if self.wer is not None:
            lines.append(f"WER      {self.wer * 100:.2f}%")
        return "\n".join(lines)


METRICS = ("ema", "bleu", "wer")


def evaluate(
    predictions: Mapping[str, Sequence[str]],
    ground_truths: Mapping[str, Sequence[str]],
    metrics: Sequence[str] = METRICS,
    smooth: str = "exp",
    tokenize: str = "none",
) -> EvalReport:
    """Score keyed predictions against keyed references.

    Raises:
        IntegrityError: a prediction's sample id has no reference.
    """
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise ValueError(f"unknown metrics: {unknown}")
    pairs = _align(predictions, ground_truths)
    if not pairs:
        raise ValueError("no predictions to evaluate")
    report = EvalReport(n=len(pairs))
    report.per_sample = [
        SampleScore(sid, p == g, wer(p, g) if g else float(len(p) > 0))
        for sid, (p, g) in zip(predictions, pairs)
    ]
    if "ema" in metrics:
        report.ema = sum(s.exact_match for s in report.per_sample) / report.n
    if "bleu" in metrics:
        report.bleu4 = bleu4(predictions, ground_truths, smooth=smooth, tokenize=tokenize)
    if "wer" in metrics:
        report.wer = corpus_wer(predictions, ground_truths)
    return report
