"""Greedy summary generation from salience scores: Hybrid 1, Hybrid 2 and cited-spans-only."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .spans import InputSet, member_similarity
from .textproc import word_count

MODES = ("hybrid1", "hybrid2", "cited_only")
MIN_WORDS = 9
REDUNDANCY_THRESHOLD = 0.5


@dataclass(frozen=True)
class Summary:
    rp_id: str
    sids: Tuple[int, ...]
    sentences: Tuple[str, ...]
    total_words: int
    mode: str
    word_limit: int

    def text(self) -> str:
        return " ".join(self.sentences)

    def to_text_file(self) -> str:
        header = f"# rp_id={self.rp_id} mode={self.mode} words={self.total_words} limit={self.word_limit}"
        return "\n".join([header, *self.sentences]) + "\n"


def rank_members(input_set: InputSet, scores: Sequence[float], candidates: Sequence[int]) -> List[Tuple[int, float]]:
    """``(sid, score)`` for the candidate positions, by descending score with ties to the lower sid."""
    pairs = [(input_set.members[i].sid, float(scores[i])) for i in candidates]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def greedy_select(ranked: Sequence[Tuple[int, float]], seed: Sequence[int], input_set: InputSet,
                  word_limit: int, similarity: Optional[np.ndarray] = None) -> List[int]:
    """Scan ``ranked`` and keep long, non-redundant sentences within the word budget.

    Over-budget sentences are skipped and the scan continues.  The seed sids
    are always kept, even if they alone exceed ``word_limit``.  Returns sids,
    seed first, in acceptance order.
    """
    if similarity is None:
        similarity = member_similarity(input_set)
    pos = {m.sid: i for i, m in enumerate(input_set.members)}
    chosen = [pos[s] for s in seed]
    used = sum(word_count(input_set.members[i].text) for i in chosen)
    for sid, _ in ranked:
        i = pos[sid]
        if i in chosen:
            continue
        n = word_count(input_set.members[i].text)
        if n < MIN_WORDS or used + n > word_limit:
            continue
        if any(similarity[i, j] > REDUNDANCY_THRESHOLD for j in chosen):
            continue
        chosen.append(i)
        used += n
    return [input_set.members[i].sid for i in chosen]


def _finish(input_set: InputSet, chosen: Sequence[int], mode: str, word_limit: int) -> Summary:
    pos = {m.sid: i for i, m in enumerate(input_set.members)}
    positions = sorted(pos[s] for s in chosen)
    texts = tuple(input_set.members[i].text for i in positions)
    return Summary(rp_id=input_set.rp_id, sids=tuple(input_set.members[i].sid for i in positions),
                   sentences=texts, total_words=sum(word_count(t) for t in texts), mode=mode,
                   word_limit=word_limit)


def _check(input_set: InputSet, scores: Sequence[float]) -> None:
    if len(scores) != input_set.N:
        raise ValueError(f"{len(scores)} scores for {input_set.N} input sentences")


def hybrid1(input_set: InputSet, scores: Sequence[float], word_limit: int = 150,
            similarity: Optional[np.ndarray] = None) -> Summary:
    """Extractive summary over the whole input set."""
    _check(input_set, scores)
    ranked = rank_members(input_set, scores, range(input_set.N))
    return _finish(input_set, greedy_select(ranked, [], input_set, word_limit, similarity), "hybrid1", word_limit)


def hybrid2(input_set: InputSet, scores: Sequence[float], word_limit: int = 150,
            similarity: Optional[np.ndarray] = None) -> Summary:
    """The full abstract plus salient, non-redundant cited text spans."""
    _check(input_set, scores)
    seed = [m.sid for m in input_set.members if m.is_abstract]
    spans = [i for i, m in enumerate(input_set.members) if m.is_cited_span and not m.is_abstract]
    ranked = rank_members(input_set, scores, spans)
    return _finish(input_set, greedy_select(ranked, seed, input_set, word_limit, similarity), "hybrid2", word_limit)


def cited_only(input_set: InputSet, scores: Sequence[float], word_limit: int = 250,
               similarity: Optional[np.ndarray] = None) -> Summary:
    """Select among cited text spans only."""
    _check(input_set, scores)
    spans = [i for i, m in enumerate(input_set.members) if m.is_cited_span]
    ranked = rank_members(input_set, scores, spans)
    return _finish(input_set, greedy_select(ranked, [], input_set, word_limit, similarity), "cited_only", word_limit)


GENERATORS = {"hybrid1": hybrid1, "hybrid2": hybrid2, "cited_only": cited_only}


def generate(mode: str, input_set: InputSet, scores: Sequence[float], word_limit: int,
             similarity: Optional[np.ndarray] = None) -> Summary:
    try:
        fn = GENERATORS[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}") from None
    return fn(input_set, scores, word_limit, similarity)


def write_summary(summary: Summary, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{summary.rp_id}.txt"
    path.write_text(summary.to_text_file(), encoding="utf-8")
    return path


def read_summary(path: Union[str, Path]) -> Tuple[str, List[str]]:
    """``(rp_id, sentences)`` from a summary file written by :func:`write_summary`."""
    lines = Path(path).read_text("utf-8").splitlines()
    rp_id = Path(path).stem
    if lines and lines[0].startswith("#"):
        for field in lines[0][1:].split():
            if field.startswith("rp_id="):
                rp_id = field[len("rp_id="):]
        lines = lines[1:]
    return rp_id, [l for l in lines if l.strip()]
