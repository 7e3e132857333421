"""Scoring: normalized exact match, ROUGE-1/2/L, and table-size bucketing.

ROUGE here is the F-measure variant with beta=1, no stemming, multiset n-gram
overlap, LCS for the L variant. Exact match applies a fixed normalizer (case,
quotes, trailing period, whitespace, thousands commas) and compares numbers
with a relative tolerance.
"""
from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")


def normalize_answer(s: str) -> str:
    s = unicodedata.normalize("NFKC", s)
    s = s.lower().strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        s = s[1:-1].strip()
    if s.endswith("."):
        s = s[:-1].strip()
    s = " ".join(s.split())
    s = re.sub(r"(?<=\d),(?=\d)", "", s)
    return s


def _as_number(s: str) -> float | None:
    if not s or not _NUMBER_RE.fullmatch(s):
        return None
    return float(s)


def _parts_equal(a: str, b: str) -> bool:
    na, nb = _as_number(a), _as_number(b)
    if na is not None and nb is not None:
        return math.isclose(na, nb, rel_tol=1e-6, abs_tol=0.0) or na == nb
    return a == b


def exact_match(pred: str, gold: str) -> bool:
    """Normalized equality; multi-answer strings split on '|' compare as sets."""
    pred_parts = [normalize_answer(p) for p in pred.split("|")]
    gold_parts = [normalize_answer(g) for g in gold.split("|")]
    if len(pred_parts) != len(gold_parts):
        return False
    remaining = list(pred_parts)
    for g in gold_parts:
        for i, p in enumerate(remaining):
            if _parts_equal(p, g):
                del remaining[i]
                break
        else:
            return False
    return True


def tokenize(s: str) -> list[str]:
    """Lowercase tokens split on non-alphanumeric runs."""
    return re.findall(r"[^\W_]+", s.lower(), re.UNICODE)


def _prf(overlap: float, pred_total: float, gold_total: float) -> tuple[float, float, float]:
    precision = overlap / pred_total if pred_total else 0.0
    recall = overlap / gold_total if gold_total else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def rouge_n(pred: str, gold: str, n: int) -> tuple[float, float, float]:
    """(precision, recall, f1) of n-gram multiset overlap, n in {1, 2}."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    pred_tokens = tokenize(pred)
    gold_tokens = tokenize(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0, 1.0, 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0, 0.0, 0.0
    pred_ngrams = Counter(tuple(pred_tokens[i:i + n]) for i in range(len(pred_tokens) - n + 1))
    gold_ngrams = Counter(tuple(gold_tokens[i:i + n]) for i in range(len(gold_tokens) - n + 1))
    overlap = sum((pred_ngrams & gold_ngrams).values())
    return _prf(overlap, sum(pred_ngrams.values()), sum(gold_ngrams.values()))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(prev[j - 1] + 1)
            else:
                current.append(max(prev[j], current[j - 1]))
        prev = current
    return prev[len(b)]


def rouge_l(pred: str, gold: str) -> tuple[float, float, float]:
    """(precision, recall, f1) from the longest common token subsequence."""
    pred_tokens = tokenize(pred)
    gold_tokens = tokenize(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0, 1.0, 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0, 0.0, 0.0
    lcs = _lcs_length(pred_tokens, gold_tokens)
    return _prf(lcs, len(pred_tokens), len(gold_tokens))


def bucket(token_count: int, small_limit: int = 2000, large_limit: int = 4000) -> str:
    """small below small_limit, large above large_limit, medium in between
    (both boundaries inclusive on the medium side)."""
    if token_count < small_limit:
        return "small"
    if token_count <= large_limit:
        return "medium"
    return "large"
