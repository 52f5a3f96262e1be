"""ROUGE-N and ROUGE-SU scoring in the configuration ``-n 4 -2 -4 -u -m -s -f A``.

Tokenization goes through :mod:`scisumm.textproc`, so scores are consistent
with the rest of the package but not byte-identical to ROUGE-1.5.5.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from .textproc import analyze

COLUMNS = ("R2_recall", "R2_f1", "R3_f1", "SU4_f1")


class EmptyReference(ValueError):
    pass


class KeyMismatch(KeyError):
    pass


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(recall=recall, precision=precision, f1=f1)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def skip_bigrams(tokens: Sequence[str], max_gap: int, include_unigrams: bool = False) -> Counter:
    """Ordered pairs ``(t_i, t_j)``, ``i < j``, skipping at most ``max_gap`` tokens.

    ``max_gap=-1`` yields no pairs, which with ``include_unigrams`` reduces to ROUGE-1 units.
    """
    units: Counter = Counter()
    n = len(tokens)
    for i in range(n):
        for j in range(i + 1, min(n, i + max_gap + 2)):
            units[(tokens[i], tokens[j])] += 1
    if include_unigrams:
        units.update((t,) for t in tokens)
    return units


def _score(cand: Counter, ref: Counter) -> Tuple[float, float]:
    overlap = sum(min(c, ref[g]) for g, c in cand.items() if g in ref)
    ref_total = sum(ref.values())
    cand_total = sum(cand.values())
    recall = overlap / ref_total if ref_total else 0.0
    precision = overlap / cand_total if cand_total else 0.0
    return precision, recall


def _prepare(text: str, stem: bool, stopwords: bool) -> List[str]:
    return analyze(text, stem=stem, drop_stopwords=stopwords)


def _check_refs(references: Sequence[str]) -> None:
    if isinstance(references, str):
        raise TypeError("references must be a list of texts")
    if not references or any(not r.strip() for r in references):
        raise EmptyReference("at least one non-empty reference is required")


def _average(pairs: Sequence[Tuple[float, float]]) -> RougeScore:
    p = sum(x[0] for x in pairs) / len(pairs)
    r = sum(x[1] for x in pairs) / len(pairs)
    return RougeScore.from_pr(p, r)


def rouge_n(candidate: str, references: Sequence[str], n: int, stem: bool = True,
            stopwords: bool = True) -> RougeScore:
    """Clipped n-gram overlap; multiple references are averaged."""
    if not 1 <= n <= 4:
        raise ValueError("n must lie in 1..4")
    _check_refs(references)
    cand = ngrams(_prepare(candidate, stem, stopwords), n)
    return _average([_score(cand, ngrams(_prepare(r, stem, stopwords), n)) for r in references])


def rouge_su(candidate: str, references: Sequence[str], max_gap: int = 4, include_unigrams: bool = True,
             stem: bool = True, stopwords: bool = True) -> RougeScore:
    if max_gap < -1:
        raise ValueError("max_gap must be >= -1")
    _check_refs(references)
    cand = skip_bigrams(_prepare(candidate, stem, stopwords), max_gap, include_unigrams)
    return _average([_score(cand, skip_bigrams(_prepare(r, stem, stopwords), max_gap, include_unigrams))
                     for r in references])


def score_summary(candidate: str, references: Sequence[str]) -> Dict[str, float]:
    """The four reported columns for one summary."""
    r2 = rouge_n(candidate, references, 2)
    r3 = rouge_n(candidate, references, 3)
    su4 = rouge_su(candidate, references, max_gap=4, include_unigrams=True)
    return {"R2_recall": r2.recall, "R2_f1": r2.f1, "R3_f1": r3.f1, "SU4_f1": su4.f1}


def evaluate_benchmark(system: Mapping[str, str], gold: Mapping[str, Sequence[str]]
                       ) -> Tuple[Dict[str, Dict[str, float]], Dict[str, float]]:
    """Per-paper scores and their unweighted means."""
    if set(system) != set(gold):
        missing = sorted(set(gold) - set(system))
        extra = sorted(set(system) - set(gold))
        raise KeyMismatch(f"system/gold ids differ: missing {missing}, unexpected {extra}")
    if not system:
        raise KeyMismatch("no papers to evaluate")
    per_paper = {pid: score_summary(system[pid], list(gold[pid])) for pid in sorted(system)}
    means = {c: sum(s[c] for s in per_paper.values()) / len(per_paper) for c in COLUMNS}
    return per_paper, means


def write_scores_csv(per_paper: Mapping[str, Mapping[str, float]], means: Mapping[str, float],
                     path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("paper_id",) + COLUMNS)
        for pid in sorted(per_paper):
            w.writerow([pid] + [f"{per_paper[pid][c]:.6f}" for c in COLUMNS])
        w.writerow(["mean"] + [f"{means[c]:.6f}" for c in COLUMNS])
    return path
