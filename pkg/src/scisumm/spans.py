"""Cited text spans, the summarization input set, authority scores and the sentence graph."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .corpus import CitationSentence, ReferencePaper
from .textproc import TfIdfVector, analyze, cosine, cosine_matrix, tfidf_vectors


class TooFewSentences(ValueError):
    pass


def content_tokens(text: str) -> List[str]:
    """Lexical view used for span matching, graph edges and redundancy: stopwords removed, unstemmed."""
    return analyze(text, stem=False, drop_stopwords=True)


@dataclass(frozen=True)
class Member:
    sid: int
    text: str
    is_abstract: bool
    is_cited_span: bool


@dataclass(frozen=True)
class InputSet:
    rp_id: str
    members: Tuple[Member, ...]
    authority: Tuple[float, ...]
    # (citation index, (sid_a, sid_b)) for every citation of the RP
    span_pairs: Tuple[Tuple[int, Tuple[int, int]], ...] = ()

    @property
    def N(self) -> int:
        return len(self.members)

    @property
    def sids(self) -> List[int]:
        return [m.sid for m in self.members]

    @property
    def texts(self) -> List[str]:
        return [m.text for m in self.members]

    def index_of(self, sid: int) -> int:
        for i, m in enumerate(self.members):
            if m.sid == sid:
                return i
        raise KeyError(sid)


@dataclass(frozen=True)
class SentenceGraph:
    weights: np.ndarray
    a_norm: np.ndarray

    @property
    def N(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Row sums of the self-looped adjacency matrix."""
        return self.weights.sum(axis=1) + 1.0


class _PaperIndex:
    """tf-idf vectors for an RP's sentences plus its citations, idf scoped to that collection."""

    def __init__(self, rp: ReferencePaper, extra: Sequence[CitationSentence] = ()):
        cites = list(rp.citations) + [c for c in extra if c not in rp.citations]
        docs = [content_tokens(s.text) for s in rp.sentences] + [content_tokens(c.text) for c in cites]
        vecs = tfidf_vectors(docs)
        n = rp.n_sentences
        self.sentence_vectors: List[TfIdfVector] = vecs[:n]
        self.citation_vectors: Dict[CitationSentence, TfIdfVector] = {}
        for c, v in zip(cites, vecs[n:]):
            self.citation_vectors.setdefault(c, v)


def extract_spans_for_citation(rp: ReferencePaper, citation: CitationSentence,
                               index: Optional[_PaperIndex] = None) -> Tuple[int, int]:
    """The two RP sentences most tf-idf-similar to ``citation``; ties go to the lower sid.

    Returned in rank order (best first).
    """
    if rp.n_sentences < 2:
        raise TooFewSentences(f"{rp.paper_id}: need at least 2 sentences, have {rp.n_sentences}")
    if index is None or citation not in index.citation_vectors:
        index = _PaperIndex(rp, extra=[citation])
    cv = index.citation_vectors[citation]
    scores = [cosine(cv, sv) for sv in index.sentence_vectors]
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return ranked[0], ranked[1]


def authority_scores(input_set: InputSet, rp: ReferencePaper) -> List[float]:
    """Log-scaled, min-max normalized authority per member (all equal gives 0.5)."""
    span_raw: Dict[int, int] = {}
    for ci, pair in input_set.span_pairs:
        count = rp.citations[ci].citing_citation_count
        for sid in set(pair):
            span_raw[sid] = span_raw.get(sid, 0) + count
    raw = []
    for m in input_set.members:
        candidates = []
        if m.is_abstract:
            candidates.append(rp.citation_count)
        if m.is_cited_span:
            candidates.append(span_raw.get(m.sid, 0))
        raw.append(max(candidates))
    logged = [math.log1p(r) for r in raw]
    lo, hi = min(logged), max(logged)
    if hi - lo <= 0.0:
        return [0.5] * len(logged)
    return [(x - lo) / (hi - lo) for x in logged]


def build_input_set(rp: ReferencePaper) -> InputSet:
    """Abstract sentences plus the union of cited text spans over all citations, sorted by sid."""
    pairs = []
    if rp.citations:
        index = _PaperIndex(rp)
        pairs = [(ci, extract_spans_for_citation(rp, c, index)) for ci, c in enumerate(rp.citations)]
    cited = {sid for _, pair in pairs for sid in pair}
    sids = sorted(set(rp.abstract_sids) | cited)
    members = tuple(Member(sid=s, text=rp.sentences[s].text, is_abstract=s in rp.abstract_sids,
                           is_cited_span=s in cited) for s in sids)
    partial = InputSet(rp_id=rp.paper_id, members=members, authority=(), span_pairs=tuple(pairs))
    auth = authority_scores(partial, rp)
    return InputSet(rp_id=rp.paper_id, members=members, authority=tuple(auth), span_pairs=tuple(pairs))


def member_similarity(input_set: InputSet) -> np.ndarray:
    """Pairwise tf-idf cosine over members, idf scoped to the input set (diagonal left as computed)."""
    vecs = tfidf_vectors([content_tokens(t) for t in input_set.texts])
    return cosine_matrix(vecs)


def normalize_adjacency(weights: np.ndarray) -> np.ndarray:
    """Symmetric normalization of ``weights + I`` by its degree matrix."""
    a = weights + np.eye(weights.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * np.outer(d_inv_sqrt, d_inv_sqrt)


def build_graph(input_set: InputSet) -> SentenceGraph:
    if input_set.N < 1:
        raise ValueError("input set is empty")
    w = member_similarity(input_set)
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    return SentenceGraph(weights=w, a_norm=normalize_adjacency(w))


def write_graph_edges(input_set: InputSet, graph: SentenceGraph, path: Union[str, Path]) -> Path:
    """Adjacency list for inspection: ``sid sid weight`` per line, upper triangle only."""
    path = Path(path)
    sids = input_set.sids
    lines = []
    for i in range(graph.N):
        for j in range(i + 1, graph.N):
            lines.append(f"{sids[i]}\t{sids[j]}\t{graph.weights[i, j]:.6f}")
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
