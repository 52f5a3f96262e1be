"""A small reverse-mode autodiff core covering just what the salience model needs.

Everything runs in float64 so that backward passes can be checked against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

DTYPE = np.float64


class ShapeMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class Tensor:
    """An array with an optional gradient and a link to the op that produced it."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward: Optional[Callable[[np.ndarray], None]] = None):
        self.value = np.asarray(value, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def backward(self, seed: Optional[np.ndarray] = None) -> None:
        """Propagate gradients from this tensor back to every tracked ancestor."""
        order: List[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.value)
        self._accumulate(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # intermediates do not need their gradient once propagated
                if node._parents:
                    node.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _result(value: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    track = any(p.requires_grad for p in parents)
    return Tensor(value, requires_grad=track, parents=parents if track else (),
                  backward=backward if track else None)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.value + b.value, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _result(a.value * b.value, (a, b), back)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.value.shape[-1] != b.value.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")

    def back(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T if b.value.ndim == 2 else np.outer(g, b.value))
        if b.requires_grad:
            b._accumulate(np.outer(a.value, g) if a.value.ndim == 1 else a.value.T @ g)

    return _result(a.value @ b.value, (a, b), back)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.value)

    def back(g):
        a._accumulate(g * (1.0 - out * out))

    return _result(out, (a,), back)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))

    def back(g):
        a._accumulate(g * out * (1.0 - out))

    return _result(out, (a,), back)


def columns(a, start: int, stop: int) -> Tensor:
    a = _wrap(a)

    def back(g):
        full = np.zeros_like(a.value)
        full[..., start:stop] = g
        a._accumulate(full)

    return _result(a.value[..., start:stop], (a,), back)


def concat(parts: Sequence, axis: int = -1) -> Tensor:
    parts = [_wrap(p) for p in parts]
    sizes = [p.value.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                p._accumulate(g[tuple(idx)])

    return _result(np.concatenate([p.value for p in parts], axis=axis), parts, back)


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]``; repeated ids accumulate their gradients."""
    ids = np.asarray(ids, dtype=np.int64)

    def back(g):
        full = np.zeros_like(table.value)
        np.add.at(full, ids, g)
        table._accumulate(full)

    return _result(table.value[ids], (table,), back)


def blend(new: Tensor, old: Tensor, mask: np.ndarray) -> Tensor:
    """``mask * new + (1 - mask) * old`` with a constant 0/1 row mask."""
    mask = np.asarray(mask, dtype=DTYPE)
    return add(mul(new, mask), mul(old, 1.0 - mask))


def log_softmax(a) -> Tensor:
    a = _wrap(a)
    shifted = a.value - a.value.max()
    logz = np.log(np.exp(shifted).sum())
    out = shifted - logz
    probs = np.exp(out)

    def back(g):
        a._accumulate(g - probs * g.sum())

    return _result(out, (a,), back)


def softmax_values(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=DTYPE)
    e = np.exp(z - z.max())
    return e / e.sum()


def total(a) -> Tensor:
    a = _wrap(a)

    def back(g):
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _result(np.asarray(a.value.sum()), (a,), back)


def dropout(x, rate: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` so evaluation is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    x = _wrap(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate).astype(DTYPE) / (1.0 - rate)
    return mul(x, mask)


# ---------------------------------------------------------------------------
# layers


@dataclass
class ModelParams:
    """Named parameter tensors of the salience model."""

    tensors: Dict[str, Tensor]
    emb_dim: int = 100
    hidden: int = 200
    layers: int = 2

    @property
    def feature_dim(self) -> int:
        return self.hidden + 1

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> List[str]:
        return list(self.tensors)

    def values(self) -> Dict[str, np.ndarray]:
        return {k: t.value for k, t in self.tensors.items()}

    def grads(self) -> Dict[str, np.ndarray]:
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.value)) for k, t in self.tensors.items()}

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams({k: Tensor(t.value.copy(), requires_grad=True) for k, t in self.tensors.items()},
                           self.emb_dim, self.hidden, self.layers)


def init_params(vocab_size: int, rng: np.random.Generator, emb_dim: int = 100, hidden: int = 200,
                layers: int = 2, embeddings: Optional[np.ndarray] = None) -> ModelParams:
    """Uniform(-0.1, 0.1) LSTM/projection/embeddings, Glorot-uniform GCN weights, forget bias 1."""
    d = hidden + 1
    t: Dict[str, np.ndarray] = {}
    t["embeddings"] = rng.uniform(-0.1, 0.1, (vocab_size, emb_dim)) if embeddings is None else np.array(embeddings, dtype=DTYPE)
    t["lstm.W_x"] = rng.uniform(-0.1, 0.1, (emb_dim, 4 * hidden))
    t["lstm.W_h"] = rng.uniform(-0.1, 0.1, (hidden, 4 * hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    t["lstm.b"] = b
    limit = np.sqrt(6.0 / (d + d))
    for layer in range(layers):
        t[f"gcn.W{layer}"] = rng.uniform(-limit, limit, (d, d))
    t["v"] = rng.uniform(-0.1, 0.1, (d,))
    if t["embeddings"].shape != (vocab_size, emb_dim):
        raise ShapeMismatch(f"embedding matrix must be {(vocab_size, emb_dim)}")
    return ModelParams({k: Tensor(np.asarray(v, dtype=DTYPE), requires_grad=True) for k, v in t.items()},
                       emb_dim, hidden, layers)


def lstm_step(x: Tensor, h: Tensor, c: Tensor, params: ModelParams) -> Tuple[Tensor, Tensor]:
    """One LSTM step; gate blocks are ordered input, forget, candidate, output."""
    H = params.hidden
    gates = add(add(matmul(x, params["lstm.W_x"]), matmul(h, params["lstm.W_h"])), params["lstm.b"])
    i = sigmoid(columns(gates, 0, H))
    f = sigmoid(columns(gates, H, 2 * H))
    g = tanh(columns(gates, 2 * H, 3 * H))
    o = sigmoid(columns(gates, 3 * H, 4 * H))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def lstm_encode(token_embeddings, params: ModelParams) -> Tensor:
    """Final hidden state of the LSTM run over one sentence's token vectors."""
    steps = [_wrap(e) for e in token_embeddings]
    if not steps:
        raise EmptySequence("cannot encode an empty token sequence")
    H = params.hidden
    h = Tensor(np.zeros(H))
    c = Tensor(np.zeros(H))
    for x in steps:
        h, c = lstm_step(x, h, c, params)
    return h


def lstm_encode_batch(token_ids: Sequence[Sequence[int]], params: ModelParams, dropout_rate: float = 0.0,
                      training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Encode several sentences at once; returns an ``N x hidden`` matrix of final hidden states.

    Shorter sentences stop updating once their tokens run out, so each row equals
    :func:`lstm_encode` on that sentence alone.
    """
    lengths = np.array([len(s) for s in token_ids])
    if len(lengths) == 0 or lengths.min() == 0:
        raise EmptySequence("every sentence needs at least one token")
    n, T, H = len(lengths), int(lengths.max()), params.hidden
    padded = np.zeros((n, T), dtype=np.int64)
    for r, s in enumerate(token_ids):
        padded[r, :len(s)] = s
    h = Tensor(np.zeros((n, H)))
    c = Tensor(np.zeros((n, H)))
    for t in range(T):
        x = embedding(params["embeddings"], padded[:, t])
        x = dropout(x, dropout_rate, training, rng)
        h_new, c_new = lstm_step(x, h, c, params)
        active = (lengths > t).astype(DTYPE)[:, None]
        if active.all():
            h, c = h_new, c_new
        else:
            h, c = blend(h_new, h, active), blend(c_new, c, active)
    return h


def gcn_forward(H, a_norm, W) -> Tensor:
    """One propagation step ``tanh(a_norm @ H @ W)``."""
    H, W = _wrap(H), _wrap(W)
    a_norm = np.asarray(a_norm, dtype=DTYPE)
    n = H.shape[0]
    if a_norm.shape != (n, n) or H.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"H {H.shape}, a_norm {a_norm.shape}, W {W.shape} do not conform")
    return tanh(matmul(Tensor(a_norm), matmul(H, W)))


# ---------------------------------------------------------------------------
# optimization


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: Mapping[str, np.ndarray], max_norm: float) -> Dict[str, np.ndarray]:
    """Rescale all gradients together when their global L2 norm exceeds ``max_norm``."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return {k: g * scale for k, g in grads.items()}
    return {k: g.copy() for k, g in grads.items()}


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState,
              lr: float = 0.001, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


# ---------------------------------------------------------------------------
# verification


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(loss_fn: Callable[[ModelParams], Tensor], params: ModelParams, epsilon: float = 1e-5,
               max_entries: int = 30, rng: Optional[np.random.Generator] = None,
               names: Optional[Iterable[str]] = None) -> Tuple[float, Dict[str, float]]:
    """Compare backprop gradients with central differences.

    ``loss_fn`` must be deterministic (no dropout).  Tensors larger than
    ``max_entries`` are checked on a random subset of entries.  Returns the
    maximum relative error overall and per tensor.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    params.zero_grad()
    loss_fn(params).backward()
    analytic = params.grads()
    params.zero_grad()
    per_tensor: Dict[str, float] = {}
    for name in (names if names is not None else params.names()):
        value = params[name].value
        flat = value.reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        worst = 0.0
        for k in idx:
            orig = flat[k]
            flat[k] = orig + epsilon
            up = float(loss_fn(params).value)
            flat[k] = orig - epsilon
            down = float(loss_fn(params).value)
            flat[k] = orig
            numeric = (up - down) / (2.0 * epsilon)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[k]), numeric))
        per_tensor[name] = worst
    params.zero_grad()
    return max(per_tensor.values(), default=0.0), per_tensor
