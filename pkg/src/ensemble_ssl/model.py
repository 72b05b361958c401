"""Small trainable text classifier with a flat parameter vector.

Architecture: embedding -> masked mean pool -> [ReLU dense] -> dropout ->
dense -> softmax. The optional hidden layer is off by default. All
parameters live in one float64 array; named weights are views into it, so
EMA and SGD updates are plain elementwise array operations.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .data import PAD, TokenSequence, pad_batch

FORMAT_VERSION = 1
_MAGIC = b"ESSLCKPT"
_DTYPES = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 32
    num_classes: int = 2
    dropout_rate: float = 0.1
    seed: int = 0
    hidden_layer: bool = False

    def __post_init__(self):
        if min(self.vocab_size, self.embed_dim, self.hidden_dim) < 1:
            raise ValueError("model dimensions must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    def layout(self) -> dict[str, tuple[int, tuple[int, ...]]]:
        """Parameter name -> (offset, shape) in layout order."""
        shapes = [("embedding", (self.vocab_size, self.embed_dim))]
        head_in = self.embed_dim
        if self.hidden_layer:
            shapes += [("hidden_w", (self.embed_dim, self.hidden_dim)),
                       ("hidden_b", (self.hidden_dim,))]
            head_in = self.hidden_dim
        shapes += [("out_w", (head_in, self.num_classes)), ("out_b", (self.num_classes,))]
        out, off = {}, 0
        for name, shape in shapes:
            out[name] = (off, shape)
            off += int(np.prod(shape))
        return out

    def num_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout().values())


def param_views(layout, flat: np.ndarray) -> dict[str, np.ndarray]:
    """Named reshaped views into a flat parameter (or gradient) vector."""
    return {name: flat[off: off + int(np.prod(shape))].reshape(shape)
            for name, (off, shape) in layout.items()}


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    owner: int
    ids: np.ndarray
    inv_counts: np.ndarray
    pooled: np.ndarray
    pre_hidden: np.ndarray | None
    drop_scale: np.ndarray | None
    head_in: np.ndarray


class TextClassifier:
    def __init__(self, config: ModelConfig, params: np.ndarray | None = None):
        self.config = config
        self.layout = config.layout()
        n = config.num_params()
        if params is None:
            params = np.zeros(n)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got shape {params.shape}")
        self.params = params.copy()

    def __getattr__(self, name):
        layout = self.__dict__.get("layout", {})
        if name in layout:
            off, shape = layout[name]
            return self.__dict__["params"][off: off + int(np.prod(shape))].reshape(shape)
        raise AttributeError(name)

    def copy(self) -> "TextClassifier":
        return TextClassifier(self.config, self.params)

    def with_dropout(self, rate: float) -> "TextClassifier":
        from dataclasses import replace

        return TextClassifier(replace(self.config, dropout_rate=rate), self.params)

    # -- forward / backward --------------------------------------------------

    def _ids(self, batch) -> np.ndarray:
        if isinstance(batch, TokenSequence):
            ids = pad_batch([batch.tokens])
        elif isinstance(batch, np.ndarray):
            ids = np.ascontiguousarray(batch, dtype=np.int64)
            if ids.ndim == 1:
                ids = ids[None, :]
        else:
            seqs = [b.tokens if isinstance(b, TokenSequence) else b for b in batch]
            ids = pad_batch(seqs)
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError(f"token id out of range for vocab_size={self.config.vocab_size}")
        return ids

    def forward(self, batch, train: bool = False, rng: np.random.Generator | None = None):
        """Return ``(logits, probs, cache)`` for a batch of token sequences.

        ``train=True`` applies inverted dropout drawn from ``rng``.
        """
        ids = self._ids(batch)
        pooled, inv_counts = kernels.pool_forward(self.embedding, ids)
        pre_hidden = None
        h = pooled
        if self.config.hidden_layer:
            pre_hidden = pooled @ self.hidden_w + self.hidden_b
            h = np.maximum(pre_hidden, 0.0)
        drop_scale = None
        p = self.config.dropout_rate
        if train and p > 0.0:
            if rng is None:
                raise ValueError("train-mode forward with dropout needs an rng")
            drop_scale = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * drop_scale
        logits = h @ self.out_w + self.out_b
        cache = ForwardCache(id(self), ids, inv_counts, pooled, pre_hidden, drop_scale, h)
        return logits, softmax(logits), cache

    def predict_logits(self, batch) -> np.ndarray:
        return self.forward(batch, train=False)[0]

    def backward(self, cache: ForwardCache, d_logits: np.ndarray) -> np.ndarray:
        """Gradient of a logits-composed loss w.r.t. the flat parameter vector."""
        d_logits = np.asarray(d_logits, dtype=np.float64)
        if d_logits.ndim == 1:
            d_logits = d_logits[None, :]
        if cache.owner != id(self) or d_logits.shape != (cache.ids.shape[0], self.config.num_classes):
            raise ValueError("backward cache does not match this model/forward pass")
        grad = np.zeros_like(self.params)
        g = param_views(self.layout, grad)
        g["out_w"][...] = cache.head_in.T @ d_logits
        g["out_b"][...] = d_logits.sum(axis=0)
        d_h = d_logits @ self.out_w.T
        if cache.drop_scale is not None:
            d_h = d_h * cache.drop_scale
        if self.config.hidden_layer:
            d_pre = d_h * (cache.pre_hidden > 0.0)
            g["hidden_w"][...] = cache.pooled.T @ d_pre
            g["hidden_b"][...] = d_pre.sum(axis=0)
            d_pooled = d_pre @ self.hidden_w.T
        else:
            d_pooled = d_h
        # the embedding view of ``grad`` is contiguous, so the kernel writes in place
        kernels.pool_backward(d_pooled, cache.ids, cache.inv_counts, g["embedding"])
        g["embedding"][PAD] = 0.0
        return grad

    def sgd_step(self, grad: np.ndarray, lr: float) -> "TextClassifier":
        if grad.shape != self.params.shape:
            raise ValueError(f"gradient shape {grad.shape} != parameter shape {self.params.shape}")
        self.params -= lr * grad
        return self


def init_model(config: ModelConfig) -> TextClassifier:
    """Uniform(-0.1, 0.1) parameters from ``config.seed``; PAD embedding row zero."""
    rng = np.random.default_rng(config.seed)
    model = TextClassifier(config, rng.uniform(-0.1, 0.1, size=config.num_params()))
    model.embedding[PAD] = 0.0
    return model


def forward(model: TextClassifier, batch, train=False, rng=None):
    return model.forward(batch, train=train, rng=rng)


def backward(model: TextClassifier, cache: ForwardCache, d_logits) -> np.ndarray:
    return model.backward(cache, d_logits)


def sgd_step(model: TextClassifier, grad: np.ndarray, lr: float) -> TextClassifier:
    return model.sgd_step(grad, lr)


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(model: TextClassifier, dtype: str = "<f8") -> bytes:
    """Serialize as magic, u32 header length, JSON header, raw little-endian params.

    ``dtype="<f4"`` writes 32-bit floats (lossy); the default is exact.
    """
    if dtype not in _DTYPES:
        raise ValueError(f"unsupported checkpoint dtype {dtype!r}")
    header = {"format_version": FORMAT_VERSION, **asdict(model.config),
              "dtype": dtype, "n_params": int(model.params.size)}
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = model.params.astype(_DTYPES[dtype]).tobytes()
    return _MAGIC + struct.pack("<I", len(head)) + head + body


def load_checkpoint(blob: bytes) -> TextClassifier:
    if len(blob) < len(_MAGIC) + 4 or not blob.startswith(_MAGIC):
        raise ValueError("not a checkpoint (bad magic or truncated)")
    (hlen,) = struct.unpack_from("<I", blob, len(_MAGIC))
    start = len(_MAGIC) + 4
    if len(blob) < start + hlen:
        raise ValueError("truncated checkpoint header")
    try:
        header = json.loads(blob[start: start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('format_version')!r}")
    dtype = _DTYPES.get(header.get("dtype"))
    if dtype is None:
        raise ValueError(f"unsupported checkpoint dtype {header.get('dtype')!r}")
    fields = {k: header[k] for k in ModelConfig.__dataclass_fields__ if k in header}
    config = ModelConfig(**fields)
    n = config.num_params()
    if header.get("n_params") != n:
        raise ValueError(f"checkpoint dimensions imply {n} params, header says {header.get('n_params')}")
    body = blob[start + hlen:]
    if len(body) != n * dtype.itemsize:
        raise ValueError(f"checkpoint body has {len(body)} bytes, expected {n * dtype.itemsize}")
    params = np.frombuffer(body, dtype=dtype).astype(np.float64)
    return TextClassifier(config, params)


def fit_supervised(model: TextClassifier, ids: np.ndarray, labels: np.ndarray, epochs: int,
                   lr: float, batch_size: int, rng: np.random.Generator,
                   weights: np.ndarray | None = None) -> TextClassifier:
    """Plain SGD on weighted mean cross-entropy over a padded id matrix.

    One shuffle per epoch and fixed-size batches with the partial tail kept;
    dropout masks come from the same ``rng``.
    """
    from .objective import batch_objective

    n = len(labels)
    if weights is None:
        weights = np.ones(n)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start: start + batch_size]
            _, probs, cache = model.forward(ids[idx], train=True, rng=rng)
            _, _, _, d_sup, _ = batch_objective(probs, labels[idx], weights[idx], (), (), ())
            model.sgd_step(model.backward(cache, d_sup), lr)
    return model
