"""Tokenization, normalization, local tf-idf and cosine similarity.

Every other module goes through these functions, so spans, graphs,
redundancy checks and ROUGE all see the same token stream.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Sequence

import numpy as np
from nltk.stem.porter import PorterStemmer

TfIdfVector = Dict[str, float]

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@lru_cache(maxsize=1)
def stopwords() -> frozenset:
    """The bundled SMART stopword list (as shipped with ROUGE-1.5.5)."""
    text = resources.files("scisumm").joinpath("resources/smart_stopwords.txt").read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def tokenize(text: str) -> List[str]:
    """Lowercase ``text`` and split it into alphanumeric runs.

    >>> tokenize("Tf-idf Cosine.")
    ['tf', 'idf', 'cosine']
    """
    return _TOKEN_RE.findall(text.lower())


def word_count(text: str) -> int:
    return len(tokenize(text))


@lru_cache(maxsize=65536)
def stem_token(token: str) -> str:
    return _STEMMER.stem(token, to_lowercase=False)


def normalize(tokens: Iterable[str], stem: bool = False, drop_stopwords: bool = False) -> List[str]:
    """Drop stopwords, then Porter-stem the survivors (each step optional)."""
    out = list(tokens)
    if drop_stopwords:
        stops = stopwords()
        out = [t for t in out if t not in stops]
    if stem:
        out = [stem_token(t) for t in out]
    return out


def analyze(text: str, stem: bool = False, drop_stopwords: bool = False) -> List[str]:
    """tokenize + normalize in one call."""
    return normalize(tokenize(text), stem=stem, drop_stopwords=drop_stopwords)


def tfidf_vectors(collection: Sequence[Sequence[str]]) -> List[TfIdfVector]:
    """Raw-count tf times smoothed idf, ``ln((1+M)/(1+df)) + 1``.

    The idf is computed over ``collection`` alone.
    """
    m = len(collection)
    counts = [Counter(doc) for doc in collection]
    df: Counter = Counter()
    for c in counts:
        df.update(c.keys())
    idf = {t: math.log((1.0 + m) / (1.0 + d)) + 1.0 for t, d in df.items()}
    return [{t: tf * idf[t] for t, tf in c.items()} for c in counts]


def norm(u: TfIdfVector) -> float:
    return math.sqrt(sum(w * w for w in u.values()))


def cosine(u: TfIdfVector, v: TfIdfVector) -> float:
    nu, nv = norm(u), norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v.get(t, 0.0) for t, w in u.items())
    return dot / (nu * nv)


def tfidf_matrix(vectors: Sequence[TfIdfVector]) -> np.ndarray:
    """Dense ``len(vectors) x |vocab|`` matrix with terms in sorted order."""
    vocab = sorted({t for v in vectors for t in v})
    index = {t: j for j, t in enumerate(vocab)}
    mat = np.zeros((len(vectors), len(vocab)))
    for i, v in enumerate(vectors):
        for t, w in v.items():
            mat[i, index[t]] = w
    return mat


def cosine_matrix(vectors: Sequence[TfIdfVector]) -> np.ndarray:
    """Pairwise cosine similarities; rows with zero norm give 0 everywhere."""
    mat = tfidf_matrix(vectors)
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = mat / safe[:, None]
    sim = unit @ unit.T
    return np.clip(sim, 0.0, 1.0)
