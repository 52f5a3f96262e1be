"""Reference-paper records: data model, JSON (de)serialization, sampling and splits."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .textproc import tokenize


class CorpusError(ValueError):
    """Base class for record validation failures; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MissingField(CorpusError):
    pass


class InvalidField(CorpusError):
    pass


class DuplicateSid(CorpusError):
    pass


class EmptyAbstract(CorpusError):
    pass


class EmptyCorpusAfterExclusion(CorpusError):
    pass


@dataclass(frozen=True)
class Sentence:
    sid: int
    text: str
    section: str = ""


@dataclass(frozen=True)
class CitationSentence:
    citing_paper_id: str
    text: str
    year: int
    citing_citation_count: int = 0


@dataclass(frozen=True)
class ReferencePaper:
    paper_id: str
    title: str
    sentences: Tuple[Sentence, ...]
    abstract_sids: frozenset
    citation_count: int
    citations: Tuple[CitationSentence, ...] = ()
    gold_summary: Optional[Tuple[str, ...]] = None

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    def text(self, sid: int) -> str:
        return self.sentences[sid].text

    def abstract_text(self) -> List[str]:
        return [self.sentences[s].text for s in sorted(self.abstract_sids)]


def _require(record: Mapping[str, Any], key: str, kind, path: str):
    if key not in record:
        raise MissingField(f"missing field {key!r}", f"{path}.{key}" if path else key)
    value = record[key]
    # bool is an int subclass; reject it where ints are expected
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise InvalidField(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}",
                           f"{path}.{key}" if path else key)
    return value


def parse_paper(record: Mapping[str, Any]) -> ReferencePaper:
    """Validate a JSON-shaped mapping and build a :class:`ReferencePaper`.

    Raises a :class:`CorpusError` subclass naming the offending path.
    """
    if not isinstance(record, Mapping):
        raise InvalidField("record must be an object", "$")
    paper_id = _require(record, "paper_id", str, "")
    title = _require(record, "title", str, "")
    citation_count = _require(record, "citation_count", int, "")
    if citation_count < 0:
        raise InvalidField("must be non-negative", "citation_count")

    raw_sents = _require(record, "sentences", list, "")
    sentences = []
    seen = set()
    for i, rs in enumerate(raw_sents):
        p = f"sentences[{i}]"
        if not isinstance(rs, Mapping):
            raise InvalidField("sentence must be an object", p)
        sid = _require(rs, "sid", int, p)
        text = _require(rs, "text", str, p)
        section = rs.get("section", "")
        if not isinstance(section, str):
            raise InvalidField("expected str", f"{p}.section")
        if sid in seen:
            raise DuplicateSid(f"sid {sid} appears more than once", f"{p}.sid")
        seen.add(sid)
        if not text.strip():
            raise InvalidField("sentence text is empty", f"{p}.text")
        if not tokenize(text):
            raise InvalidField("sentence has no word tokens", f"{p}.text")
        sentences.append(Sentence(sid=sid, text=text, section=section))
    if not sentences:
        raise InvalidField("paper has no sentences", "sentences")
    for i, s in enumerate(sentences):
        if s.sid != i:
            raise InvalidField(f"sids must be contiguous from 0 in order; expected {i}, got {s.sid}",
                               f"sentences[{i}].sid")

    abstract = _require(record, "abstract_sids", list, "")
    if not abstract:
        raise EmptyAbstract("abstract_sids is empty", "abstract_sids")
    for j, a in enumerate(abstract):
        if not isinstance(a, int) or isinstance(a, bool) or not 0 <= a < len(sentences):
            raise InvalidField(f"abstract sid {a!r} is not a valid sentence index", f"abstract_sids[{j}]")

    citations = []
    for i, rc in enumerate(record.get("citations", [])):
        p = f"citations[{i}]"
        if not isinstance(rc, Mapping):
            raise InvalidField("citation must be an object", p)
        year = _require(rc, "year", int, p)
        if not 1950 <= year <= 2100:
            raise InvalidField(f"implausible year {year}", f"{p}.year")
        text = _require(rc, "text", str, p)
        if not text.strip():
            raise InvalidField("citation text is empty", f"{p}.text")
        count = rc.get("citing_citation_count", 0)
        if not isinstance(count, int) or isinstance(count, bool) or count < 0:
            raise InvalidField("must be a non-negative integer", f"{p}.citing_citation_count")
        citations.append(CitationSentence(
            citing_paper_id=_require(rc, "citing_paper_id", str, p),
            text=text, year=year, citing_citation_count=count))

    gold = record.get("gold_summary")
    if gold is not None:
        if not isinstance(gold, list) or not all(isinstance(g, str) for g in gold):
            raise InvalidField("expected a list of strings", "gold_summary")
        gold = tuple(gold)

    return ReferencePaper(paper_id=paper_id, title=title, sentences=tuple(sentences),
                          abstract_sids=frozenset(abstract), citation_count=citation_count,
                          citations=tuple(citations), gold_summary=gold)


def to_record(paper: ReferencePaper) -> Dict[str, Any]:
    rec: Dict[str, Any] = {
        "paper_id": paper.paper_id,
        "title": paper.title,
        "citation_count": paper.citation_count,
        "sentences": [{"sid": s.sid, "section": s.section, "text": s.text} for s in paper.sentences],
        "abstract_sids": sorted(paper.abstract_sids),
        "citations": [{"citing_paper_id": c.citing_paper_id, "year": c.year,
                       "citing_citation_count": c.citing_citation_count, "text": c.text}
                      for c in paper.citations],
    }
    if paper.gold_summary is not None:
        rec["gold_summary"] = list(paper.gold_summary)
    return rec


def dumps(paper: ReferencePaper) -> str:
    return json.dumps(to_record(paper), ensure_ascii=False, indent=1, sort_keys=True) + "\n"


def load_paper(path: Union[str, Path]) -> ReferencePaper:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidField(f"not valid JSON ({exc})", str(path)) from exc
    try:
        return parse_paper(record)
    except CorpusError as exc:
        raise type(exc)(str(exc), f"{path.name}:{exc.path}") from exc


def save_paper(paper: ReferencePaper, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = directory / f"{paper.paper_id}.json"
    out.write_text(dumps(paper), encoding="utf-8")
    return out


MANIFEST_NAME = "splits.json"


def load_corpus(directory: Union[str, Path]) -> List[ReferencePaper]:
    """Load every ``*.json`` record in ``directory`` (the split manifest excluded), sorted by id."""
    directory = Path(directory)
    papers = [load_paper(p) for p in sorted(directory.glob("*.json")) if p.name != MANIFEST_NAME]
    ids = [p.paper_id for p in papers]
    if len(set(ids)) != len(ids):
        raise InvalidField("duplicate paper_id across files", str(directory))
    return sorted(papers, key=lambda p: p.paper_id)


def load_split_manifest(directory: Union[str, Path]) -> Optional[Dict[str, List[str]]]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        return None
    data = json.loads(path.read_text("utf-8"))
    if not isinstance(data, dict) or not all(isinstance(v, list) for v in data.values()):
        raise InvalidField("split manifest must map split names to id lists", str(path))
    return {k: [str(x) for x in v] for k, v in data.items()}


def write_split_manifest(directory: Union[str, Path], splits: Mapping[str, Iterable[str]]) -> Path:
    path = Path(directory) / MANIFEST_NAME
    path.write_text(json.dumps({k: list(v) for k, v in splits.items()}, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _year_key(c: CitationSentence):
    return (c.year, c.citing_paper_id)


def sample_citations(citations: Sequence[CitationSentence], limit: int,
                     rng: Union[random.Random, int, None] = None) -> List[CitationSentence]:
    """Keep the oldest and latest citations and randomly sample the rest up to ``limit``.

    Equal years are broken by the lexicographically lowest ``citing_paper_id``.
    The result is sorted by year.
    """
    if limit < 2:
        raise ValueError("limit must be at least 2")
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    items = list(citations)
    if len(items) <= limit:
        return sorted(items, key=_year_key)
    oldest = min(range(len(items)), key=lambda i: _year_key(items[i]))
    latest = min(range(len(items)), key=lambda i: (-items[i].year, items[i].citing_paper_id))
    rest = [i for i in range(len(items)) if i not in (oldest, latest)]
    chosen = [oldest, latest] + rng.sample(rest, limit - 2)
    return sorted((items[i] for i in chosen), key=_year_key)


def make_splits(corpus: Sequence[ReferencePaper], exclude_ids: Iterable[str] = (), seed: int = 0,
                validation_fraction: float = 0.2) -> Tuple[List[ReferencePaper], List[ReferencePaper]]:
    """Drop excluded ids, then make a seeded train/validation split."""
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must lie in (0, 1)")
    exclude = set(exclude_ids)
    kept = sorted((p for p in corpus if p.paper_id not in exclude), key=lambda p: p.paper_id)
    if not kept:
        raise EmptyCorpusAfterExclusion("no papers left after exclusion")
    random.Random(seed).shuffle(kept)
    n_val = int(round(len(kept) * validation_fraction))
    if len(kept) >= 2:
        n_val = min(max(n_val, 1), len(kept) - 1)
    else:
        n_val = 0
    return kept[n_val:], kept[:n_val]
