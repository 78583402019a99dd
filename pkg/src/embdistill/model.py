"""The sentence classifier: word vectors, mean pooling, one hidden layer,
temperature softmax.

When an encoder is attached, every word vector passes through it before
pooling, so the big look-up table and the encoder train jointly with
the classifier.  A folded model carries a small table instead and no
encoder; predictions are identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .embeddings import (
    DistilledTable,
    EmbeddingTable,
    EncoderLayer,
    Vocabulary,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    StaleCacheError,
)
from .ops import cross_entropy, dropout_mask, one_hot, softmax_ce_backward, softmax_t

REGIME_DIRECT = "direct"
REGIME_ENCODING = "encoding"
REGIME_MATCHING = "matching_softmax"
REGIMES = (REGIME_DIRECT, REGIME_ENCODING, REGIME_MATCHING)

_MDL_MAGIC = b"MDL1"
_MDL_VERSION = 1


@dataclass
class ModelConfig:
    n_embed: int
    n_hidden: int
    n_classes: int
    n_distill: int = 0  # 0 means no encoder
    dropout_rate: float = 0.0
    activation: str = "tanh"
    regime: str = REGIME_DIRECT

    def __post_init__(self):
        for name in ("n_embed", "n_hidden", "n_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_distill < 0:
            raise ConfigError("n_distill must be >= 0")
        if self.n_distill and self.n_distill >= self.n_embed:
            raise ConfigError(
                f"n_distill ({self.n_distill}) must be smaller than "
                f"n_embed ({self.n_embed})"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation != "tanh":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}, expected one of {REGIMES}")


def _glorot(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


class ClassifierModel:
    """Mean-pooling sentence classifier with optional embedding encoder.

    ``version`` increments on every parameter update; backward passes
    refuse caches minted under an older version.
    """

    def __init__(
        self,
        config: ModelConfig,
        embedding: EmbeddingTable,
        encoder: EncoderLayer | None,
        hidden_w: np.ndarray,
        hidden_b: np.ndarray,
        out_w: np.ndarray,
        out_b: np.ndarray,
    ):
        self.config = config
        self.embedding = embedding
        self.encoder = encoder
        self.hidden_w = hidden_w
        self.hidden_b = hidden_b
        self.out_w = out_w
        self.out_b = out_b
        self.version = 0

        in_dim = encoder.n_distill if encoder is not None else embedding.dim
        if encoder is not None and encoder.n_embed != embedding.dim:
            raise DimensionError(
                f"encoder expects {encoder.n_embed}-dim columns, "
                f"table has dim {embedding.dim}"
            )
        if hidden_w.shape != (config.n_hidden, in_dim):
            raise DimensionError(
                f"hidden weights {hidden_w.shape} do not match "
                f"({config.n_hidden}, {in_dim})"
            )
        if hidden_b.shape != (config.n_hidden,):
            raise DimensionError("hidden bias shape mismatch")
        if out_w.shape != (config.n_classes, config.n_hidden):
            raise DimensionError(
                f"output weights {out_w.shape} do not match "
                f"({config.n_classes}, {config.n_hidden})"
            )
        if out_b.shape != (config.n_classes,):
            raise DimensionError("output bias shape mismatch")

    @property
    def input_dim(self) -> int:
        return self.encoder.n_distill if self.encoder is not None else self.embedding.dim

    @classmethod
    def initialize(
        cls, config: ModelConfig, embedding: EmbeddingTable, rng: np.random.Generator
    ) -> "ClassifierModel":
        """Fresh model: glorot-uniform weights, zero biases.

        An encoder is created when ``config.n_distill`` is nonzero and
        the table is still large; a distilled table needs none.
        """
        encoder = None
        if config.n_distill and not isinstance(embedding, DistilledTable):
            if embedding.dim != config.n_embed:
                raise DimensionError(
                    f"table dim {embedding.dim} does not match n_embed {config.n_embed}"
                )
            encoder = EncoderLayer(
                _glorot(config.n_distill, config.n_embed, rng),
                np.zeros(config.n_distill),
            )
        in_dim = config.n_distill if config.n_distill else config.n_embed
        return cls(
            config,
            embedding,
            encoder,
            _glorot(config.n_hidden, in_dim, rng),
            np.zeros(config.n_hidden),
            _glorot(config.n_classes, config.n_hidden, rng),
            np.zeros(config.n_classes),
        )

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        """All trainable arrays, embedding matrix included."""
        params = [("embedding", self.embedding.matrix)]
        if self.encoder is not None:
            params.append(("encoder_w", self.encoder.w_encode))
            params.append(("encoder_b", self.encoder.b_encode))
        params.extend(
            [
                ("hidden_w", self.hidden_w),
                ("hidden_b", self.hidden_b),
                ("out_w", self.out_w),
                ("out_b", self.out_b),
            ]
        )
        return params

    def snapshot(self) -> list[np.ndarray]:
        return [a.copy() for _, a in self.named_parameters()]

    def restore(self, arrays: list[np.ndarray]) -> None:
        for (_, a), saved in zip(self.named_parameters(), arrays):
            np.copyto(a, saved)
        self.version += 1

    def copy(self) -> "ClassifierModel":
        m = ClassifierModel(
            self.config,
            self.embedding.copy(),
            self.encoder.copy() if self.encoder is not None else None,
            self.hidden_w.copy(),
            self.hidden_b.copy(),
            self.out_w.copy(),
            self.out_b.copy(),
        )
        return m


@dataclass
class ForwardCache:
    """Intermediate values one backward pass needs."""

    tokens: np.ndarray
    columns: np.ndarray          # embedding columns, (table_dim, k)
    encoded: np.ndarray | None   # encoder outputs, (n_distill, k)
    pool: np.ndarray
    hidden_act: np.ndarray       # tanh output before dropout
    mask: np.ndarray | None
    hidden: np.ndarray           # after dropout
    logits: np.ndarray
    y: np.ndarray
    temperature: float
    model_version: int


@dataclass
class Gradients:
    """Gradients for every trainable parameter of one model.

    Embedding gradients are kept sparse: only columns of words that
    actually appeared carry entries.
    """

    hidden_w: np.ndarray
    hidden_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    encoder_w: np.ndarray | None = None
    encoder_b: np.ndarray | None = None
    embed_cols: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, model: ClassifierModel) -> "Gradients":
        has_enc = model.encoder is not None
        return cls(
            np.zeros_like(model.hidden_w),
            np.zeros_like(model.hidden_b),
            np.zeros_like(model.out_w),
            np.zeros_like(model.out_b),
            np.zeros_like(model.encoder.w_encode) if has_enc else None,
            np.zeros_like(model.encoder.b_encode) if has_enc else None,
            {},
        )

    def add_(self, other: "Gradients") -> None:
        self.hidden_w += other.hidden_w
        self.hidden_b += other.hidden_b
        self.out_w += other.out_w
        self.out_b += other.out_b
        if self.encoder_w is not None:
            self.encoder_w += other.encoder_w
            self.encoder_b += other.encoder_b
        for col, g in other.embed_cols.items():
            if col in self.embed_cols:
                self.embed_cols[col] = self.embed_cols[col] + g
            else:
                self.embed_cols[col] = g.copy()

    def scale_(self, s: float) -> None:
        self.hidden_w *= s
        self.hidden_b *= s
        self.out_w *= s
        self.out_b *= s
        if self.encoder_w is not None:
            self.encoder_w *= s
            self.encoder_b *= s
        for g in self.embed_cols.values():
            g *= s


def forward(
    model: ClassifierModel,
    sample,
    temperature: float = 1.0,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    dropout_rate: float | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Class distribution for one sample plus the cache for backward.

    Dropout (on the hidden layer output) is active only in train mode;
    evaluation is deterministic.
    """
    tokens = np.asarray(sample.tokens)
    if tokens.size == 0:
        raise DataError("cannot classify an empty sample")
    columns = model.embedding.matrix[:, tokens]
    if model.encoder is not None:
        encoded = model.encoder.encode_columns(columns)
        features = encoded
    else:
        encoded = None
        features = columns
    pool = features.mean(axis=1)

    pre_hidden = model.hidden_w @ pool + model.hidden_b
    hidden_act = np.tanh(pre_hidden)
    rate = model.config.dropout_rate if dropout_rate is None else dropout_rate
    mask = None
    if train_mode and rate > 0.0:
        if rng is None:
            raise ConfigError("dropout in train mode needs a random generator")
        mask = dropout_mask(hidden_act.size, rate, rng)
    hidden = hidden_act * mask if mask is not None else hidden_act

    logits = model.out_w @ hidden + model.out_b
    y = softmax_t(logits, temperature)
    cache = ForwardCache(
        tokens, columns, encoded, pool, hidden_act, mask, hidden,
        logits, y, temperature, model.version,
    )
    return y, cache


def backward_from_logit_grad(
    model: ClassifierModel, cache: ForwardCache, dz: np.ndarray
) -> Gradients:
    """Propagate a logit-space gradient down to every parameter."""
    if cache.model_version != model.version:
        raise StaleCacheError(
            "backward called with a cache from a previous parameter state"
        )
    grads = Gradients.zeros_like(model)
    grads.out_w = np.outer(dz, cache.hidden)
    grads.out_b = dz.copy()

    d_hidden = model.out_w.T @ dz
    if cache.mask is not None:
        d_hidden = d_hidden * cache.mask
    d_pre_hidden = d_hidden * (1.0 - cache.hidden_act * cache.hidden_act)
    grads.hidden_w = np.outer(d_pre_hidden, cache.pool)
    grads.hidden_b = d_pre_hidden.copy()

    d_pool = model.hidden_w.T @ d_pre_hidden
    k = cache.tokens.size
    d_feature = d_pool / k  # mean pooling spreads the gradient evenly
    if model.encoder is not None:
        d_enc = np.repeat(d_feature[:, None], k, axis=1)
        d_pre_enc = d_enc * (1.0 - cache.encoded * cache.encoded)
        grads.encoder_w = d_pre_enc @ cache.columns.T
        grads.encoder_b = d_pre_enc.sum(axis=1)
        d_columns = model.encoder.w_encode.T @ d_pre_enc
    else:
        d_columns = np.repeat(d_feature[:, None], k, axis=1)

    for j, token in enumerate(cache.tokens):
        token = int(token)
        if token in grads.embed_cols:
            grads.embed_cols[token] = grads.embed_cols[token] + d_columns[:, j]
        else:
            grads.embed_cols[token] = d_columns[:, j].copy()
    return grads


def backward(
    model: ClassifierModel,
    cache: ForwardCache,
    target: np.ndarray,
    temperature: float = 1.0,
) -> Gradients:
    """Gradients of cross_entropy(softmax_t(logits, T), target).

    ``target`` may be one-hot or any distribution summing to 1.
    """
    dz = softmax_ce_backward(cache.logits, target, temperature)
    return backward_from_logit_grad(model, cache, dz)


def sample_loss(model: ClassifierModel, sample, temperature: float = 1.0) -> float:
    """Evaluation-mode cross-entropy of one sample against its label."""
    y, _ = forward(model, sample, temperature)
    return cross_entropy(y, one_hot(sample.label, model.config.n_classes))


def predict(model: ClassifierModel, sample) -> int:
    y, _ = forward(model, sample)
    return int(np.argmax(y))


def evaluate_accuracy(model: ClassifierModel, samples) -> float:
    """Fraction of samples whose argmax prediction matches the label.

    Runs with dropout off and temperature 1.
    """
    if not samples:
        raise DataError("cannot evaluate on an empty sample list")
    hits = sum(1 for s in samples if predict(model, s) == s.label)
    return hits / len(samples)


def count_parameters(model: ClassifierModel) -> int:
    """Total stored values; a folded model no longer counts the big table."""
    return sum(a.size for _, a in model.named_parameters())


_REGIME_CODES = {tag: i for i, tag in enumerate(REGIMES)}


def _write_array(fh, a: np.ndarray, order: str = "C") -> None:
    fh.write(a.astype("<f4").tobytes(order=order))


def _read_floats(fh, shape: tuple[int, ...], what: str, order: str = "C") -> np.ndarray:
    n = int(np.prod(shape))
    buf = fh.read(4 * n)
    if len(buf) != 4 * n:
        raise FormatError(f"truncated model file while reading {what}")
    return np.frombuffer(buf, dtype="<f4").reshape(shape, order=order).astype(float)


def save_model(model: ClassifierModel, path) -> None:
    """Write the native binary model format.

    Layout: magic "MDL1", u32 format version, config block (u32 dims:
    n_embed, n_distill, n_hidden, n_classes, |V|; u8 regime code, u8
    has_encoder, u8 distilled_table; f32 dropout), the vocabulary as
    length-prefixed UTF-8 tokens, then parameter blocks as little-endian
    f32: table (column-major), encoder W and b (when present), hidden W
    and b, output W and b (row-major).
    """
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(_MDL_MAGIC)
        fh.write(struct.pack("<I", _MDL_VERSION))
        fh.write(
            struct.pack(
                "<IIIII",
                cfg.n_embed,
                cfg.n_distill,
                cfg.n_hidden,
                cfg.n_classes,
                len(model.embedding.vocab),
            )
        )
        fh.write(
            struct.pack(
                "<BBBf",
                _REGIME_CODES[cfg.regime],
                1 if model.encoder is not None else 0,
                1 if isinstance(model.embedding, DistilledTable) else 0,
                cfg.dropout_rate,
            )
        )
        for word in model.embedding.vocab.words:
            enc = word.encode("utf-8")
            fh.write(struct.pack("<I", len(enc)))
            fh.write(enc)
        _write_array(fh, model.embedding.matrix, order="F")
        if model.encoder is not None:
            _write_array(fh, model.encoder.w_encode)
            _write_array(fh, model.encoder.b_encode)
        _write_array(fh, model.hidden_w)
        _write_array(fh, model.hidden_b)
        _write_array(fh, model.out_w)
        _write_array(fh, model.out_b)


def load_model(path, expected_config: ModelConfig | None = None) -> ClassifierModel:
    """Read a model written by ``save_model``.

    When ``expected_config`` is given, any mismatch in dimensions,
    regime, or dropout raises a FormatError instead of returning a
    surprising model.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MDL_MAGIC:
            raise FormatError(f"{path}: not a native model file (bad magic)")
        raw = fh.read(4)
        if len(raw) != 4:
            raise FormatError(f"{path}: truncated header")
        (version,) = struct.unpack("<I", raw)
        if version != _MDL_VERSION:
            raise FormatError(f"{path}: unsupported model format version {version}")
        raw = fh.read(20 + 7)
        if len(raw) != 27:
            raise FormatError(f"{path}: truncated config block")
        n_embed, n_distill, n_hidden, n_classes, vocab_size = struct.unpack(
            "<IIIII", raw[:20]
        )
        regime_code, has_encoder, distilled, dropout = struct.unpack("<BBBf", raw[20:])
        if regime_code >= len(REGIMES):
            raise FormatError(f"{path}: unknown regime code {regime_code}")
        config = ModelConfig(
            n_embed=n_embed,
            n_hidden=n_hidden,
            n_classes=n_classes,
            n_distill=n_distill,
            dropout_rate=float(np.float32(dropout)),
            regime=REGIMES[regime_code],
        )
        words = []
        for i in range(vocab_size):
            raw = fh.read(4)
            if len(raw) != 4:
                raise FormatError(f"{path}: truncated vocabulary")
            (length,) = struct.unpack("<I", raw)
            token = fh.read(length)
            if len(token) != length:
                raise FormatError(f"{path}: truncated vocabulary token")
            words.append(token.decode("utf-8"))
        vocab = Vocabulary.from_words(words)
        if len(vocab) != vocab_size:
            raise FormatError(f"{path}: stored vocabulary lacks the unknown token")

        table_dim = n_distill if distilled else n_embed
        matrix = _read_floats(fh, (table_dim, vocab_size), "embedding table", order="F")
        table_cls = DistilledTable if distilled else EmbeddingTable
        embedding = table_cls(vocab, matrix)
        encoder = None
        if has_encoder:
            w = _read_floats(fh, (n_distill, n_embed), "encoder weights")
            b = _read_floats(fh, (n_distill,), "encoder bias")
            encoder = EncoderLayer(w, b)
        in_dim = n_distill if (has_encoder or distilled) else n_embed
        hidden_w = _read_floats(fh, (n_hidden, in_dim), "hidden weights")
        hidden_b = _read_floats(fh, (n_hidden,), "hidden bias")
        out_w = _read_floats(fh, (n_classes, n_hidden), "output weights")
        out_b = _read_floats(fh, (n_classes,), "output bias")
        if fh.read(1):
            raise FormatError(f"{path}: trailing data after parameters")

    model = ClassifierModel(config, embedding, encoder, hidden_w, hidden_b, out_w, out_b)
    if expected_config is not None:
        mismatch = (
            config.n_embed != expected_config.n_embed
            or config.n_distill != expected_config.n_distill
            or config.n_hidden != expected_config.n_hidden
            or config.n_classes != expected_config.n_classes
            or config.regime != expected_config.regime
            # dropout crossed a float32 boundary on disk
            or abs(config.dropout_rate - expected_config.dropout_rate) > 1e-6
        )
        if mismatch:
            raise FormatError(
                f"{path}: stored config {config} does not match expected {expected_config}"
            )
    return model
