"""Two-layer feed-forward beam classifier in plain numpy.

The network maps a box centre ``x in R^2`` to ``Q`` beam logits::

    h = relu(W1 x + b1) * mask / (1 - p)     # mask only while training
    logits = W2 h + b2

Training uses mean softmax cross-entropy, exact backpropagation and Adam
with a step learning-rate schedule.
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import (
    BadK,
    EmptyDataset,
    LabelOutOfRange,
    NonFinite,
    ShapeMismatch,
)

PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class MlpParams:
    W1: np.ndarray  # (H, 2)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (Q, H)
    b2: np.ndarray  # (Q,)

    @property
    def hidden(self):
        return self.W1.shape[0]

    @property
    def num_classes(self):
        return self.W2.shape[0]

    def arrays(self):
        return [getattr(self, n) for n in PARAM_NAMES]

    def copy(self):
        return MlpParams(*(a.copy() for a in self.arrays()))

    @classmethod
    def zeros_like(cls, other):
        return cls(*(np.zeros_like(a) for a in other.arrays()))


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-2
    lr_decay_epochs: tuple = (20, 40)
    lr_factor: float = 0.1
    dropout: float = 0.3
    epochs: int = 50
    hidden: int = 128
    num_classes: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "hidden", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not self.lr > 0 or not self.lr_factor > 0:
            raise ValueError("lr and lr_factor must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    def lr_at(self, epoch):
        """Learning rate for a 1-indexed epoch; decays apply from the start of each listed epoch."""
        n_decays = sum(1 for e in self.lr_decay_epochs if epoch >= e)
        return self.lr * self.lr_factor**n_decays


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(MlpParams.zeros_like(params), MlpParams.zeros_like(params), 0)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_top1: float


@dataclass
class TrainResult:
    params: MlpParams
    history: list = field(default_factory=list)
    best_epoch: int = 0


def init_params(hidden=128, num_classes=32, in_dim=2, seed=0):
    """Uniform(+-1/sqrt(fan_in)) initialization for weights and biases."""
    rng = np.random.default_rng(seed)
    b_in = 1.0 / np.sqrt(in_dim)
    b_hid = 1.0 / np.sqrt(hidden)
    return MlpParams(
        W1=rng.uniform(-b_in, b_in, size=(hidden, in_dim)),
        b1=rng.uniform(-b_in, b_in, size=hidden),
        W2=rng.uniform(-b_hid, b_hid, size=(num_classes, hidden)),
        b2=rng.uniform(-b_hid, b_hid, size=num_classes),
    )


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if not np.all(np.isfinite(x)):
        raise NonFinite("network input contains non-finite values")
    return x, single


def dropout_mask(shape, p, rng):
    """Inverted-dropout mask: Bernoulli(1 - p) scaled by 1/(1 - p)."""
    if p == 0:
        return np.ones(shape)
    rng = np.random.default_rng(rng)
    return (rng.random(shape) >= p) / (1.0 - p)


def forward(params, x, *, dropout=0.0, rng=None, mask=None):
    """Logits for one input (shape ``(2,)``) or a batch (shape ``(B, 2)``).

    Evaluation mode is the default. Training mode is selected by passing
    ``dropout > 0`` together with an ``rng`` (or an explicit ``mask`` of shape
    ``(B, H)``, already scaled). Returns ``(logits, cache)``.
    """
    xb, single = _as_batch(x)
    pre = xb @ params.W1.T + params.b1
    h = np.maximum(pre, 0.0)
    if mask is None and dropout > 0 and rng is not None:
        mask = dropout_mask(h.shape, dropout, rng)
    if mask is not None:
        h = h * mask
    logits = h @ params.W2.T + params.b2
    cache = (xb, pre, h, mask)
    return (logits[0] if single else logits), cache


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(np.asarray(logits, dtype=float)))


def loss_and_grad(params, x, labels, *, dropout=0.0, rng=None, mask=None):
    """Mean cross-entropy over the batch and its exact gradient."""
    labels = np.asarray(labels, dtype=int).reshape(-1)
    Q = params.num_classes
    if labels.size and (labels.min() < 0 or labels.max() >= Q):
        raise LabelOutOfRange(f"labels must lie in [0, {Q})")
    logits, (xb, pre, h, mask) = forward(params, x, dropout=dropout, rng=rng, mask=mask)
    logits = np.atleast_2d(logits)
    n = xb.shape[0]
    if labels.size != n:
        raise ShapeMismatch(f"{n} inputs but {labels.size} labels")
    logp = log_softmax(logits)
    loss = -float(np.mean(logp[np.arange(n), labels]))

    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dW2 = dlogits.T @ h
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ params.W2
    if mask is not None:
        dh = dh * mask
    dpre = dh * (pre > 0)
    dW1 = dpre.T @ xb
    db1 = dpre.sum(axis=0)
    return loss, MlpParams(dW1, db1, dW2, db2)


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied in place; returns ``(params, state)``."""
    for name in PARAM_NAMES:
        if getattr(params, name).shape != getattr(grads, name).shape:
            raise ShapeMismatch(f"gradient for {name} has the wrong shape")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name in PARAM_NAMES:
        p, g = getattr(params, name), getattr(grads, name)
        m, v = getattr(state.m, name), getattr(state.v, name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def logits_batch(params, x):
    logits, _ = forward(params, np.asarray(x, dtype=float).reshape(-1, 2))
    return np.atleast_2d(logits)


def rank_beams(logits):
    """Beam indices sorted by descending logit, ties toward the lower index."""
    return np.argsort(-np.asarray(logits), axis=-1, kind="stable")


def predict_topk(params, x, k):
    Q = params.num_classes
    if not 1 <= k <= Q:
        raise BadK(f"k must lie in [1, {Q}], got {k}")
    logits, _ = forward(params, x)
    return rank_beams(logits)[..., :k]


def top1_accuracy(params, x, y):
    if len(y) == 0:
        return 0.0
    pred = np.argmax(logits_batch(params, x), axis=1)
    return float(np.mean(pred == np.asarray(y)))


def train(train_x, train_y, val_x, val_y, config=TrainConfig(), params=None):
    """Mini-batch Adam training; keeps the parameters with the best validation top-1.

    Data are shuffled every epoch with a generator seeded from ``config.seed``;
    given the same inputs the returned history is bit-identical.
    """
    train_x = np.asarray(train_x, dtype=float).reshape(-1, 2)
    train_y = np.asarray(train_y, dtype=int)
    val_x = np.asarray(val_x, dtype=float).reshape(-1, 2)
    val_y = np.asarray(val_y, dtype=int)
    if len(train_y) == 0 or len(val_y) == 0:
        raise EmptyDataset("training and validation sets must be nonempty")
    if len(train_x) != len(train_y) or len(val_x) != len(val_y):
        raise ShapeMismatch("inputs and labels differ in length")

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    if params is None:
        params = init_params(config.hidden, config.num_classes, seed=seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    drop_rng = np.random.default_rng(seeds[2])
    state = AdamState.for_params(params)

    best, best_acc, best_epoch = params.copy(), -1.0, 0
    history = []
    n = len(train_y)
    for epoch in range(1, config.epochs + 1):
        lr = config.lr_at(epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grad(
                params, train_x[idx], train_y[idx], dropout=config.dropout, rng=drop_rng
            )
            adam_step(params, grads, state, lr, config.beta1, config.beta2, config.eps)
            total += loss * len(idx)
        acc = top1_accuracy(params, val_x, val_y)
        history.append(EpochRecord(epoch, lr, total / n, acc))
        if acc > best_acc:
            best, best_acc, best_epoch = params.copy(), acc, epoch
    return TrainResult(params=best, history=history, best_epoch=best_epoch)


def params_to_dict(params, config=None):
    out = {
        "shapes": {n: list(getattr(params, n).shape) for n in PARAM_NAMES},
        "values": {n: [float(v) for v in getattr(params, n).ravel()] for n in PARAM_NAMES},
    }
    if config is not None:
        out["config"] = {f.name: getattr(config, f.name) for f in fields(config)}
        out["config"]["lr_decay_epochs"] = list(config.lr_decay_epochs)
    return out


def params_from_dict(block):
    arrays = []
    for n in PARAM_NAMES:
        shape = tuple(block["shapes"][n])
        values = np.array(block["values"][n], dtype=float)
        if values.size != int(np.prod(shape)):
            raise ShapeMismatch(f"{n}: {values.size} values for shape {shape}")
        arrays.append(values.reshape(shape))
    return MlpParams(*arrays)


def config_from_dict(block):
    block = dict(block)
    if "lr_decay_epochs" in block:
        block["lr_decay_epochs"] = tuple(block["lr_decay_epochs"])
    return replace(TrainConfig(), **block)
