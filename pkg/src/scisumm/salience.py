"""The salience model: LSTM sentence encoder, authority feature, two GCN layers, softmax scoring.

Also holds target construction from ROUGE, the cross-entropy loss, the
training loop with early stopping and the checkpoint format.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import neural as nn
from .corpus import ReferencePaper
from .rouge import rouge_n
from .spans import InputSet, SentenceGraph, build_graph, build_input_set
from .textproc import tokenize

log = logging.getLogger(__name__)

UNK = "<unk>"


class NonFiniteLoss(FloatingPointError):
    pass


# ---------------------------------------------------------------------------
# vocabulary and embeddings


@dataclass(frozen=True)
class Vocabulary:
    tokens: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, text: str) -> List[int]:
        return [self._index.get(t, 0) for t in tokenize(text)]

    @classmethod
    def build(cls, papers: Iterable[ReferencePaper], min_freq: int = 1) -> "Vocabulary":
        """Index 0 is the shared out-of-vocabulary row; the rest are sorted."""
        counts: Counter = Counter()
        for p in papers:
            for s in p.sentences:
                counts.update(tokenize(s.text))
        return cls((UNK,) + tuple(sorted(t for t, c in counts.items() if c >= min_freq)))


def load_embeddings(path: Union[str, Path], vocab: Vocabulary, dim: int = 100,
                    rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, int]:
    """GloVe-style text vectors copied onto matching vocabulary rows.

    Rows without a pretrained vector keep a uniform(-0.1, 0.1) draw. Returns the
    matrix and the number of rows that were found.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    mat = rng.uniform(-0.1, 0.1, (len(vocab), dim))
    index = {t: i for i, t in enumerate(vocab.tokens)}
    found = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected a token and {dim} values, got {len(parts) - 1}")
            i = index.get(parts[0])
            if i is not None:
                mat[i] = np.array(parts[1:], dtype=np.float64)
                found += 1
    return mat, found


# ---------------------------------------------------------------------------
# documents


@dataclass
class Document:
    """Everything the model needs from one reference paper, prepared once."""

    paper: ReferencePaper
    input_set: InputSet
    graph: SentenceGraph
    token_ids: List[List[int]]
    targets: Optional[np.ndarray] = None


def prepare_document(paper: ReferencePaper, vocab: Vocabulary, with_targets: bool = True) -> Document:
    inp = build_input_set(paper)
    graph = build_graph(inp)
    ids = [vocab.ids(t) for t in inp.texts]
    targets = None
    if with_targets and paper.gold_summary:
        targets = build_targets(inp, list(paper.gold_summary))
    return Document(paper=paper, input_set=inp, graph=graph, token_ids=ids, targets=targets)


# ---------------------------------------------------------------------------
# targets and loss


def normalize_scores(raw: Sequence[float]) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    s = raw.sum()
    if s <= 0.0:
        return np.full(len(raw), 1.0 / len(raw))
    return raw / s


def sentence_rouge(text: str, gold: Sequence[str]) -> float:
    """Mean of ROUGE-1 and ROUGE-2 recall of one sentence against the gold summary."""
    ref = [" ".join(gold)]
    return 0.5 * (rouge_n(text, ref, 1).recall + rouge_n(text, ref, 2).recall)


def build_targets(input_set: InputSet, gold: Sequence[str]) -> np.ndarray:
    if not gold or not any(g.strip() for g in gold):
        raise ValueError("gold summary is empty")
    return normalize_scores([sentence_rouge(t, gold) for t in input_set.texts])


def entropy(p: Sequence[float]) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def loss(pred: Sequence[float], target: Sequence[float]) -> float:
    """Cross entropy in nats; zero-target terms contribute nothing."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("distributions differ in length")
    mask = target > 0
    return float(-(target[mask] * np.log(pred[mask])).sum())


def cross_entropy(log_probs: nn.Tensor, target: np.ndarray) -> nn.Tensor:
    return nn.mul(nn.total(nn.mul(log_probs, np.asarray(target, dtype=np.float64))), -1.0)


def estimate_salience(Z, v) -> np.ndarray:
    """Softmax over ``Z @ v`` (max-subtracted)."""
    Z = Z.value if isinstance(Z, nn.Tensor) else np.asarray(Z, dtype=np.float64)
    v = v.value if isinstance(v, nn.Tensor) else np.asarray(v, dtype=np.float64)
    return nn.softmax_values(Z @ v)


# ---------------------------------------------------------------------------
# model


@dataclass
class ModelConfig:
    emb_dim: int = 100
    hidden: int = 200
    layers: int = 2
    dropout: float = 0.5
    use_authority: bool = True


def encode_sentences(doc: Document, params: nn.ModelParams, use_authority: bool = True, training: bool = False,
                     dropout_rate: float = 0.5, rng: Optional[np.random.Generator] = None) -> nn.Tensor:
    """``N x (hidden+1)`` GCN output for the document's input set."""
    x = nn.lstm_encode_batch(doc.token_ids, params, dropout_rate, training, rng)
    x = nn.dropout(x, dropout_rate, training, rng)
    auth = np.asarray(doc.input_set.authority, dtype=np.float64)[:, None]
    if not use_authority:
        auth = np.zeros_like(auth)
    h = nn.concat([x, nn.Tensor(auth)], axis=1)
    for layer in range(params.layers):
        h = nn.gcn_forward(h, doc.graph.a_norm, params[f"gcn.W{layer}"])
        h = nn.dropout(h, dropout_rate, training, rng)
    return h


class SalienceModel:
    def __init__(self, params: nn.ModelParams, vocab: Vocabulary, config: ModelConfig):
        self.params = params
        self.vocab = vocab
        self.config = config

    @classmethod
    def initialize(cls, vocab: Vocabulary, config: Optional[ModelConfig] = None, seed: int = 0,
                   embeddings: Optional[np.ndarray] = None) -> "SalienceModel":
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        params = nn.init_params(len(vocab), rng, config.emb_dim, config.hidden, config.layers, embeddings)
        return cls(params, vocab, config)

    def log_salience(self, doc: Document, training: bool = False,
                     rng: Optional[np.random.Generator] = None, params: Optional[nn.ModelParams] = None) -> nn.Tensor:
        params = params if params is not None else self.params
        z = encode_sentences(doc, params, self.config.use_authority, training, self.config.dropout, rng)
        return nn.log_softmax(nn.matmul(z, params["v"]))

    def doc_loss(self, doc: Document, training: bool = False, rng: Optional[np.random.Generator] = None,
                 params: Optional[nn.ModelParams] = None) -> nn.Tensor:
        if doc.targets is None:
            raise ValueError(f"{doc.paper.paper_id}: no gold summary, cannot compute a loss")
        return cross_entropy(self.log_salience(doc, training, rng, params), doc.targets)

    def predict(self, doc: Document) -> np.ndarray:
        """Salience distribution over the document's input set (dropout off)."""
        return np.exp(self.log_salience(doc).value)

    def grad_check(self, doc: Document, epsilon: float = 1e-5, max_entries: int = 30,
                   seed: int = 0) -> Tuple[float, Dict[str, float]]:
        return nn.grad_check(lambda p: self.doc_loss(doc, params=p), self.params, epsilon, max_entries,
                             np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 5
    clip_norm: float = 2.0
    dropout: float = 0.5
    patience: int = 10
    max_epochs: int = 100
    seed: int = 0
    use_authority: bool = True


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainingLog:
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    # global gradient norm actually handed to Adam, per step
    step_norms: List[float] = field(default_factory=list)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        lines = ["epoch,train_loss,val_loss"]
        lines += [f"{e.epoch},{e.train_loss:.10f},{e.val_loss:.10f}" for e in self.epochs]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True when training should stop."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best, self.best_epoch, self.bad_epochs = val_loss, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def mean_loss(model: SalienceModel, docs: Sequence[Document]) -> float:
    return float(np.mean([model.doc_loss(d).value for d in docs]))


def train(model: SalienceModel, train_docs: Sequence[Document], val_docs: Sequence[Document],
          config: TrainConfig, validate=None) -> TrainingLog:
    """Adam with gradient accumulation over ``batch_size`` documents, clipping and early stopping.

    ``model.params`` ends up holding the parameters of the best validation epoch.
    ``validate`` overrides the validation-loss function (defaults to :func:`mean_loss`).
    """
    if not train_docs or not val_docs:
        raise ValueError("training and validation sets must be non-empty")
    validate = validate or mean_loss
    model.config.dropout = config.dropout
    model.config.use_authority = config.use_authority
    rng = np.random.default_rng(config.seed)
    state = nn.AdamState()
    stopper = EarlyStopping(config.patience)
    best = model.params.copy()
    record = TrainingLog()
    order = list(range(len(train_docs)))
    for epoch in range(1, config.max_epochs + 1):
        rng.shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            group = [train_docs[i] for i in order[start:start + config.batch_size]]
            model.params.zero_grad()
            for doc in group:
                l = model.doc_loss(doc, training=True, rng=rng)
                value = float(l.value)
                if not math.isfinite(value):
                    raise NonFiniteLoss(f"epoch {epoch}: loss {value} on {doc.paper.paper_id}")
                epoch_losses.append(value)
                nn.mul(l, 1.0 / len(group)).backward()
            grads = nn.clip_gradients(model.params.grads(), config.clip_norm)
            record.step_norms.append(nn.global_norm(grads))
            nn.adam_step(model.params.values(), grads, state, lr=config.lr)
            model.params.zero_grad()
        val = float(validate(model, val_docs))
        if not math.isfinite(val):
            raise NonFiniteLoss(f"epoch {epoch}: validation loss {val}")
        record.epochs.append(EpochRecord(epoch, float(np.mean(epoch_losses)), val))
        log.info("epoch %d train %.5f val %.5f", epoch, record.epochs[-1].train_loss, val)
        stop = stopper.update(epoch, val)
        if stopper.best_epoch == epoch:
            best = model.params.copy()
        if stop:
            record.stopped_early = True
            break
    record.best_epoch = stopper.best_epoch
    model.params = best
    return record


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout (all integers little-endian):
#   8 bytes   magic b"SCSMCKPT"
#   4 bytes   uint32 format version
#   8 bytes   uint64 length of the JSON header
#   header    UTF-8 JSON, keys sorted: {"version", "model_config", "train_config",
#             "vocab", "tensors": [{"name", "shape", "offset"}]}
#   payload   float64 little-endian, row-major, tensors back to back;
#             "offset" counts values from the start of the payload

MAGIC = b"SCSMCKPT"
FORMAT_VERSION = 1


def save_checkpoint(model: SalienceModel, path: Union[str, Path], train_config: Optional[TrainConfig] = None) -> Path:
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for name in model.params.names():
        arr = np.ascontiguousarray(model.params[name].value, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.size
    header = {
        "version": FORMAT_VERSION,
        "model_config": asdict(model.config),
        "train_config": asdict(train_config) if train_config else None,
        "vocab": list(model.vocab.tokens),
        "tensors": entries,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for c in chunks:
            fh.write(c)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[SalienceModel, Optional[TrainConfig]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a scisumm checkpoint")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[20:20 + hlen].decode("utf-8"))
    payload = np.frombuffer(data[20 + hlen:], dtype="<f8")
    tensors = {}
    for e in header["tensors"]:
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = payload[e["offset"]:e["offset"] + size].reshape(e["shape"]).astype(np.float64)
        tensors[e["name"]] = nn.Tensor(arr, requires_grad=True)
    mc = ModelConfig(**header["model_config"])
    params = nn.ModelParams(tensors, mc.emb_dim, mc.hidden, mc.layers)
    tc = TrainConfig(**header["train_config"]) if header.get("train_config") else None
    return SalienceModel(params, Vocabulary(tuple(header["vocab"])), mc), tc
