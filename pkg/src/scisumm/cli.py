"""Command-line entry point: ingest, train, summarize, evaluate, spans, grad-check, pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import corpus as corpus_mod
from .corpus import CorpusError, ReferencePaper
from .rouge import EmptyReference, KeyMismatch, evaluate_benchmark, write_scores_csv
from .salience import (Document, ModelConfig, NonFiniteLoss, SalienceModel, TrainConfig, Vocabulary,
                       load_checkpoint, load_embeddings, prepare_document, save_checkpoint, train)
from .spans import TooFewSentences, build_graph, build_input_set, write_graph_edges
from .summarize import generate, read_summary, write_summary

log = logging.getLogger("scisumm")

COMMANDS = ("ingest", "train", "summarize", "evaluate", "spans", "grad-check", "pipeline")
MODE_ALIASES = {"hybrid1": "hybrid1", "hybrid2": "hybrid2", "cited": "cited_only", "cited_only": "cited_only"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    corpus_dir: Optional[str] = None
    embeddings_path: Optional[str] = None
    checkpoint: Optional[str] = None
    summaries_dir: Optional[str] = None
    out: str = "out"
    seed: int = 0
    jobs: int = 1
    use_authority: bool = True
    mode: str = "hybrid2"
    word_limit: Optional[int] = None
    citation_limit: int = 20
    split: Optional[str] = None
    figures: bool = True
    lr: float = 0.001
    batch_size: int = 5
    clip_norm: float = 2.0
    dropout: float = 0.5
    patience: int = 10
    max_epochs: int = 100

    @property
    def limit(self) -> int:
        if self.word_limit is not None:
            return self.word_limit
        return 250 if self.mode == "cited_only" else 150

    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, clip_norm=self.clip_norm, dropout=self.dropout,
                           patience=self.patience, max_epochs=self.max_epochs, seed=self.seed,
                           use_authority=self.use_authority)


# flag name -> RunConfig field
_FLAG_FIELDS = {
    "corpus": "corpus_dir", "embeddings": "embeddings_path", "checkpoint": "checkpoint",
    "summaries": "summaries_dir", "out": "out", "seed": "seed", "jobs": "jobs", "authority": "use_authority",
    "mode": "mode", "limit": "word_limit", "citation_limit": "citation_limit", "split": "split",
    "figures": "figures", "lr": "lr", "batch_size": "batch_size", "clip_norm": "clip_norm",
    "dropout": "dropout", "patience": "patience", "max_epochs": "max_epochs",
}


def _on_off(value: str) -> bool:
    v = str(value).strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def _mode(value: str) -> str:
    try:
        return MODE_ALIASES[value]
    except KeyError:
        raise argparse.ArgumentTypeError(f"mode must be one of hybrid1, hybrid2, cited") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--corpus", help="corpus directory (falls back to $SCISUMM_DATA)")
    common.add_argument("--embeddings", help="GloVe-format 100-d text vectors")
    common.add_argument("--checkpoint", help="model checkpoint path")
    common.add_argument("--summaries", help="directory of summary files to evaluate")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker threads for per-document stages")
    common.add_argument("--mode", type=_mode, help="hybrid1 | hybrid2 | cited")
    common.add_argument("--limit", type=int, help="summary word limit (150; 250 for cited)")
    common.add_argument("--authority", type=_on_off, help="on | off")
    common.add_argument("--citation-limit", dest="citation_limit", type=int)
    common.add_argument("--split", help="restrict to one split of the corpus manifest")
    common.add_argument("--figures", type=_on_off, help="render figures (on | off)")
    common.add_argument("--lr", type=float)
    common.add_argument("--batch-size", dest="batch_size", type=int)
    common.add_argument("--clip-norm", dest="clip_norm", type=float)
    common.add_argument("--dropout", type=float)
    common.add_argument("--patience", type=int)
    common.add_argument("--max-epochs", dest="max_epochs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scisumm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"scisumm {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "ingest": "validate a corpus directory and write a cleaned cache",
        "train": "train the salience model",
        "summarize": "write one summary per paper",
        "evaluate": "score summaries with ROUGE-2/3/SU4",
        "spans": "dump input sets and sentence graphs for inspection",
        "grad-check": "compare backprop gradients with finite differences",
        "pipeline": "ingest, train, summarize and evaluate in one go",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], argument_default=argparse.SUPPRESS)
    return parser


def read_config_file(path: str) -> Dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(name: str, value):
    f = {fl.name: fl for fl in fields(RunConfig)}[name]
    if name in ("use_authority", "figures"):
        return _on_off(value) if isinstance(value, str) else bool(value)
    if name == "mode":
        return _mode(value)
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    if "int" in kind and value is not None:
        return int(value)
    if "float" in kind and value is not None:
        return float(value)
    return value


def _validate(command: str, cfg: RunConfig) -> None:
    checks = [
        (cfg.lr > 0, "--lr must be positive"),
        (cfg.batch_size >= 1, "--batch-size must be >= 1"),
        (cfg.clip_norm > 0, "--clip-norm must be positive"),
        (0.0 <= cfg.dropout < 1.0, "--dropout must lie in [0, 1)"),
        (cfg.patience >= 1, "--patience must be >= 1"),
        (cfg.max_epochs >= 1, "--max-epochs must be >= 1"),
        (cfg.jobs >= 1, "--jobs must be >= 1"),
        (cfg.word_limit is None or cfg.word_limit >= 0, "--limit must be >= 0"),
        (cfg.citation_limit >= 2, "--citation-limit must be >= 2"),
    ]
    for ok, msg in checks:
        if not ok:
            raise UsageError(msg)
    if command != "grad-check":
        if cfg.corpus_dir is None:
            raise UsageError("no corpus given: use --corpus or set SCISUMM_DATA")
        if cfg.corpus_dir != "toy" and not Path(cfg.corpus_dir).is_dir():
            raise UsageError(f"corpus directory {cfg.corpus_dir} does not exist")
    if cfg.embeddings_path is not None and not Path(cfg.embeddings_path).is_file():
        raise UsageError(f"embeddings file {cfg.embeddings_path} does not exist")
    if command == "summarize" and (cfg.checkpoint is None or not Path(cfg.checkpoint).is_file()):
        raise UsageError("summarize needs an existing --checkpoint")
    if command == "evaluate" and cfg.summaries_dir is not None and not Path(cfg.summaries_dir).is_dir():
        raise UsageError(f"summaries directory {cfg.summaries_dir} does not exist")


def parse_args(argv: Optional[Sequence[str]] = None, env: Optional[Dict[str, str]] = None) -> Tuple[str, RunConfig, bool]:
    """Returns ``(command, config, verbose)``; raises :class:`UsageError` on bad input."""
    env = os.environ if env is None else env
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError(parser.format_usage().strip()) from None
    if ns.command is None:
        raise UsageError(parser.format_help())
    given = vars(ns)
    cfg = RunConfig()
    if "config" in given:
        if not Path(given["config"]).is_file():
            raise UsageError(f"config file {given['config']} does not exist")
        known = {f.name for f in fields(RunConfig)} | set(_FLAG_FIELDS)
        for key, value in read_config_file(given["config"]).items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            name = _FLAG_FIELDS.get(key, key)
            try:
                setattr(cfg, name, _coerce(name, value))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key}: {exc}") from None
    for flag, name in _FLAG_FIELDS.items():
        if flag in given:
            setattr(cfg, name, given[flag])
    if cfg.corpus_dir is None and env.get("SCISUMM_DATA"):
        cfg.corpus_dir = env["SCISUMM_DATA"]
    _validate(ns.command, cfg)
    return ns.command, cfg, bool(given.get("verbose", False))


# ---------------------------------------------------------------------------
# pipeline stages


def toy_corpus_dir() -> Path:
    return Path(str(resources.files("scisumm").joinpath("data/toy")))


def _corpus_path(cfg: RunConfig) -> Path:
    return toy_corpus_dir() if cfg.corpus_dir == "toy" else Path(cfg.corpus_dir)


def _hash_inputs(paths: Sequence[Path]) -> Dict[str, object]:
    files = {}
    total = hashlib.sha256()
    for p in sorted(paths, key=lambda x: x.name):
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        files[p.name] = digest
        total.update(f"{p.name}\0{digest}\n".encode())
    return {"files": files, "sha256": total.hexdigest()}


def write_manifest(out: Path, command: str, cfg: RunConfig, inputs: Sequence[Path], extra=None) -> Path:
    """Everything needed to re-run: command, full config, seed and input hashes (no timestamps)."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "scisumm_version": __version__,
        "seed": cfg.seed,
        "config": asdict(cfg),
        "inputs": _hash_inputs([p for p in inputs if p.is_file()]),
    }
    if extra:
        manifest.update(extra)
    path = out / f"manifest.{command}.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _corpus_files(directory: Path) -> List[Path]:
    return sorted(directory.glob("*.json"))


def _select(papers: List[ReferencePaper], directory: Path, split: Optional[str]) -> List[ReferencePaper]:
    if split is None:
        return papers
    manifest = corpus_mod.load_split_manifest(directory)
    if manifest is None or split not in manifest:
        raise UsageError(f"split {split!r} not found in {directory / corpus_mod.MANIFEST_NAME}")
    wanted = set(manifest[split])
    return [p for p in papers if p.paper_id in wanted]


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _prepare(papers, vocab, jobs, with_targets=True) -> List[Document]:
    def one(p):
        try:
            return prepare_document(p, vocab, with_targets)
        except (TooFewSentences, ValueError) as exc:
            raise RuntimeError(f"{p.paper_id}: {exc}") from exc
    return _map(one, papers, jobs)


def cmd_ingest(cfg: RunConfig) -> int:
    src = _corpus_path(cfg)
    out = Path(cfg.out) / "corpus"
    papers = corpus_mod.load_corpus(src)
    for p in papers:
        rng = random.Random(f"{cfg.seed}:{p.paper_id}")
        sampled = corpus_mod.sample_citations(p.citations, cfg.citation_limit, rng) if p.citations else []
        corpus_mod.save_paper(dataclasses.replace(p, citations=tuple(sampled)), out)
    splits = corpus_mod.load_split_manifest(src)
    if splits is not None:
        corpus_mod.write_split_manifest(out, splits)
    write_manifest(Path(cfg.out), "ingest", cfg, _corpus_files(src), {"papers": len(papers)})
    print(f"ingested {len(papers)} papers into {out}")
    return 0


def _splits(cfg: RunConfig, papers: List[ReferencePaper], src: Path):
    manifest = corpus_mod.load_split_manifest(src) or {}
    with_gold = [p for p in papers if p.gold_summary]
    if "train" in manifest and "validation" in manifest:
        by_id = {p.paper_id: p for p in with_gold}
        return ([by_id[i] for i in manifest["train"] if i in by_id],
                [by_id[i] for i in manifest["validation"] if i in by_id])
    exclude = set(manifest.get("test", [])) | set(manifest.get("validation", []))
    return corpus_mod.make_splits(with_gold, exclude, cfg.seed)


def cmd_train(cfg: RunConfig) -> int:
    src = _corpus_path(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    papers = corpus_mod.load_corpus(src)
    train_papers, val_papers = _splits(cfg, papers, src)
    if not train_papers or not val_papers:
        raise UsageError("need at least one training and one validation paper with gold summaries")
    vocab = Vocabulary.build(train_papers)
    emb = None
    if cfg.embeddings_path:
        emb, found = load_embeddings(cfg.embeddings_path, vocab, rng=np.random.default_rng(cfg.seed))
        log.info("pretrained vectors for %d of %d tokens", found, len(vocab))
    model = SalienceModel.initialize(vocab, ModelConfig(dropout=cfg.dropout, use_authority=cfg.use_authority),
                                     seed=cfg.seed, embeddings=emb)
    tr = _prepare(train_papers, vocab, cfg.jobs)
    va = _prepare(val_papers, vocab, cfg.jobs)
    tc = cfg.train_config()
    record = train(model, tr, va, tc)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out / "model.ckpt"
    save_checkpoint(model, ckpt, tc)
    record.write_csv(out / "training_log.csv")
    if cfg.figures:
        from .report import plot_training_log
        plot_training_log(record, out / "training_loss.png")
    write_manifest(out, "train", cfg, _corpus_files(src) + ([Path(cfg.embeddings_path)] if cfg.embeddings_path else []),
                   {"train_ids": [p.paper_id for p in train_papers], "validation_ids": [p.paper_id for p in val_papers],
                    "best_epoch": record.best_epoch, "checkpoint": str(ckpt)})
    print(f"trained {len(record.epochs)} epochs (best {record.best_epoch}); checkpoint {ckpt}")
    return 0


def cmd_summarize(cfg: RunConfig) -> int:
    src = _corpus_path(cfg)
    out = Path(cfg.out)
    model, _ = load_checkpoint(cfg.checkpoint)
    model.config.use_authority = cfg.use_authority
    papers = _select(corpus_mod.load_corpus(src), src, cfg.split)
    docs = _prepare(papers, model.vocab, cfg.jobs, with_targets=False)

    def one(doc: Document):
        return generate(cfg.mode, doc.input_set, model.predict(doc), cfg.limit)

    summaries = _map(one, docs, cfg.jobs)
    target = Path(cfg.summaries_dir) if cfg.summaries_dir else out / "summaries"
    for s in summaries:
        write_summary(s, target)
    if cfg.figures and summaries:
        from .report import plot_summary_lengths
        plot_summary_lengths([s.total_words for s in summaries], cfg.limit, out / "summary_lengths.png")
    write_manifest(out, "summarize", cfg, _corpus_files(src) + [Path(cfg.checkpoint)],
                   {"summaries": len(summaries), "summaries_dir": str(target)})
    print(f"wrote {len(summaries)} {cfg.mode} summaries to {target}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    sdir = Path(cfg.summaries_dir) if cfg.summaries_dir else out / "summaries"
    if not sdir.is_dir():
        raise UsageError(f"summaries directory {sdir} does not exist")
    system = {}
    for path in sorted(sdir.glob("*.txt")):
        rp_id, sents = read_summary(path)
        system[rp_id] = " ".join(sents)
    src = _corpus_path(cfg)
    papers = _select(corpus_mod.load_corpus(src), src, cfg.split)
    gold = {p.paper_id: [" ".join(p.gold_summary)] for p in papers if p.gold_summary}
    per_paper, means = evaluate_benchmark(system, gold)
    out.mkdir(parents=True, exist_ok=True)
    write_scores_csv(per_paper, means, out / "rouge.csv")
    if cfg.figures:
        from .report import plot_rouge
        plot_rouge(per_paper, means, out / "rouge.png", title=f"{len(per_paper)} papers")
    write_manifest(out, "evaluate", cfg, _corpus_files(src) + sorted(sdir.glob("*.txt")))
    print("paper_id,R2_recall,R2_f1,R3_f1,SU4_f1")
    print("mean," + ",".join(f"{means[c]:.4f}" for c in ("R2_recall", "R2_f1", "R3_f1", "SU4_f1")))
    return 0


def cmd_spans(cfg: RunConfig) -> int:
    src = _corpus_path(cfg)
    out = Path(cfg.out) / "spans"
    out.mkdir(parents=True, exist_ok=True)
    papers = _select(corpus_mod.load_corpus(src), src, cfg.split)
    for p in papers:
        inp = build_input_set(p)
        graph = build_graph(inp)
        lines = ["sid\tabstract\tcited_span\tauthority\ttext"]
        lines += [f"{m.sid}\t{int(m.is_abstract)}\t{int(m.is_cited_span)}\t{a:.6f}\t{m.text}"
                  for m, a in zip(inp.members, inp.authority)]
        (out / f"{p.paper_id}.members.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_graph_edges(inp, graph, out / f"{p.paper_id}.edges.tsv")
    print(f"wrote input sets and graphs for {len(papers)} papers to {out}")
    return 0


def cmd_grad_check(cfg: RunConfig) -> int:
    from .synthetic import peaked_paper
    paper = peaked_paper("GC", cfg.seed, n_sentences=3, n_gold=1)
    tokens = sorted({t for s in paper.sentences for t in s.text.lower().replace(".", " ").split()})
    vocab = Vocabulary(("<unk>",) + tuple(tokens[:9]))
    model = SalienceModel.initialize(vocab, ModelConfig(dropout=0.0, use_authority=True), seed=cfg.seed)
    doc = prepare_document(paper, vocab)
    worst, per = model.grad_check(doc, epsilon=1e-5, seed=cfg.seed)
    for name, err in per.items():
        print(f"{name:16s} max relative error {err:.3e}")
    status = "PASS" if worst < 1e-4 else "FAIL"
    print(f"{status}: max relative error {worst:.3e} (threshold 1e-4)")
    return 0 if worst < 1e-4 else 1


def cmd_pipeline(cfg: RunConfig) -> int:
    """ingest, then train/summarize/evaluate on the ingested cache."""
    code = cmd_ingest(cfg)
    if code:
        return code
    cfg = dataclasses.replace(cfg, corpus_dir=str(Path(cfg.out) / "corpus"))
    if cfg.checkpoint is None:
        cfg.checkpoint = str(Path(cfg.out) / "model.ckpt")
    for stage in (cmd_train, cmd_summarize, cmd_evaluate):
        code = stage(cfg)
        if code:
            return code
    return 0


HANDLERS = {"ingest": cmd_ingest, "train": cmd_train, "summarize": cmd_summarize, "evaluate": cmd_evaluate,
            "spans": cmd_spans, "grad-check": cmd_grad_check, "pipeline": cmd_pipeline}


def run_pipeline(command: str, cfg: RunConfig) -> int:
    """Run one command; module errors are reported and turned into a nonzero status."""
    try:
        return HANDLERS[command](cfg)
    except UsageError as exc:
        print(f"scisumm: error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, KeyMismatch, EmptyReference, TooFewSentences, NonFiniteLoss, RuntimeError, ValueError,
            OSError) as exc:
        print(f"scisumm {command}: error: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        command, cfg, verbose = parse_args(argv)
    except UsageError as exc:
        print(f"scisumm: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run_pipeline(command, cfg)


if __name__ == "__main__":
    sys.exit(main())
