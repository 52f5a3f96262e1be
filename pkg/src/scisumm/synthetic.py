"""Seeded synthetic reference papers for fixtures, smoke runs and property tests.

The text is word salad drawn from small topical vocabularies, but it has the
structure the pipeline cares about: an abstract of roughly 110 words, a body
that citations point into, citation sentences that paraphrase body
sentences, and a ~150 word gold summary mixing both.
"""

from __future__ import annotations

import random
from typing import List, Optional

from .corpus import CitationSentence, ReferencePaper, Sentence

FUNCTION_WORDS = ["the", "a", "of", "to", "in", "for", "with", "on", "by", "we", "this", "that", "and", "is",
                  "are", "our", "from", "as", "which", "an"]

TOPICS = {
    "parsing": "parser dependency treebank grammar constituent head arc projective transition beam chart "
               "lexicalized attachment derivation shift reduce span tree labeled accuracy".split(),
    "translation": "translation phrase alignment decoder bilingual reordering target source lexical bleu "
                   "hierarchical rule fertility distortion corpus parallel word tuning".split(),
    "coreference": "pronoun antecedent mention coreference gender number resolution anaphora entity cluster "
                   "salience agreement noun candidate discourse referent chain".split(),
    "sentiment": "sentiment polarity review opinion subjective lexicon positive negative aspect classifier "
                 "rating emotion adjective product domain adaptation feature".split(),
    "tagging": "tagger sequence label crf hidden markov viterbi morphology token lexicon tag emission "
               "transition unknown suffix accuracy perceptron feature".split(),
    "summarization": "summary sentence extraction salience redundancy compression rouge document cluster "
                     "centroid graph ranking abstract citation coverage length".split(),
}

GENERIC = ("method model approach results show propose present evaluate experiments data performance "
           "improve baseline significant task system learning training test standard large corpus "
           "algorithm framework analysis error previous work novel effective").split()


def _sentence(rng: random.Random, topic: List[str], n_words: int, topic_share: float = 0.5) -> str:
    words = []
    for _ in range(n_words):
        r = rng.random()
        if r < topic_share:
            words.append(rng.choice(topic))
        elif r < topic_share + 0.25:
            words.append(rng.choice(FUNCTION_WORDS))
        else:
            words.append(rng.choice(GENERIC))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def make_paper(paper_id: str, seed: int, n_body: int = 40, n_abstract: int = 5, n_citations: int = 15,
               abstract_words: int = 22, with_gold: bool = True, topic: Optional[str] = None) -> ReferencePaper:
    rng = random.Random(seed)
    topic_name = topic or rng.choice(sorted(TOPICS))
    vocab = TOPICS[topic_name]
    sentences = []
    for sid in range(n_abstract + n_body):
        if sid < n_abstract:
            n = max(9, int(rng.gauss(abstract_words, 4)))
            section = "abstract"
        else:
            n = max(4, int(rng.gauss(20, 7)))
            section = "body"
        sentences.append(Sentence(sid=sid, text=_sentence(rng, vocab, n), section=section))

    citations = []
    for k in range(n_citations):
        target = sentences[rng.randrange(len(sentences))].text.rstrip(".").split()
        keep = [w.lower() for w in target if rng.random() < 0.6]
        extra = _sentence(rng, vocab, rng.randint(3, 8)).rstrip(".").lower().split()
        text = "Following prior work , " + " ".join(keep + extra) + " ."
        citations.append(CitationSentence(citing_paper_id=f"{paper_id}-C{k:02d}", text=text,
                                          year=rng.randint(1995, 2016),
                                          citing_citation_count=rng.randint(0, 300)))

    gold = None
    if with_gold:
        pool = [s.text for s in sentences[:n_abstract]] + [sentences[rng.randrange(n_abstract, len(sentences))].text
                                                          for _ in range(4)]
        gold_sents, words = [], 0
        for text in pool:
            kept = [w for w in text.rstrip(".").split() if rng.random() < 0.8]
            if words + len(kept) > 150:
                break
            gold_sents.append(" ".join(kept) + ".")
            words += len(kept)
        gold = tuple(gold_sents)

    return ReferencePaper(paper_id=paper_id, title=f"A study of {topic_name} ({paper_id})",
                          sentences=tuple(sentences), abstract_sids=frozenset(range(n_abstract)),
                          citation_count=rng.randint(21, 928), citations=tuple(citations), gold_summary=gold)


def make_corpus(n: int, seed: int = 0, prefix: str = "P", **kwargs) -> List[ReferencePaper]:
    rng = random.Random(seed)
    return [make_paper(f"{prefix}{i:03d}", rng.randrange(2 ** 31), **kwargs) for i in range(n)]


def peaked_paper(paper_id: str, seed: int, n_sentences: int = 6, n_gold: int = 2) -> ReferencePaper:
    """A small paper whose sentences come from different topics and whose gold summary
    copies ``n_gold`` of them, so ROUGE targets are sharply peaked."""
    rng = random.Random(seed)
    topics = sorted(TOPICS)
    rng.shuffle(topics)
    sentences = []
    for sid in range(n_sentences):
        vocab = TOPICS[topics[sid % len(topics)]]
        text = _sentence(rng, vocab, rng.randint(10, 16), topic_share=0.8)
        sentences.append(Sentence(sid=sid, text=text, section="abstract" if sid < 2 else "body"))
    picked = sorted(rng.sample(range(n_sentences), n_gold))
    citations = tuple(
        CitationSentence(citing_paper_id=f"{paper_id}-C{k}", text=sentences[s].text.lower(),
                         year=2000 + k, citing_citation_count=rng.randint(0, 50))
        for k, s in enumerate(range(2, n_sentences)))
    return ReferencePaper(paper_id=paper_id, title=f"Peaked fixture {paper_id}", sentences=tuple(sentences),
                          abstract_sids=frozenset({0, 1}), citation_count=rng.randint(21, 928),
                          citations=citations, gold_summary=tuple(sentences[s].text for s in picked))


def overfit_fixture(seed: int = 0) -> List[ReferencePaper]:
    """Three peaked papers for the capacity check."""
    rng = random.Random(seed)
    return [peaked_paper(f"F{i}", rng.randrange(2 ** 31)) for i in range(3)]
