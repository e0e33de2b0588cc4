"""Donsker-Varadhan density estimation: objective, training loop, recovery.

The critic f models e^T in the Donsker-Varadhan representation of
KL(data || uniform). Training maximizes a linearized finite-sample bound

    mean(log f(x_data)) - mean(f(x_unif)) / ema - log(ema) + 1

where `ema` is an exponential moving average of the uniform-batch mean of
f. The linearization comes from log(x) <= x/a + log(a) - 1 (tight at
x = a), so with a = ema tracking E_unif[f] the expression stays an
unbiased-gradient surrogate of the exact bound. Once trained, the data
log density is recovered as log f(x) + log u(x) - log(ema), with u the
constant uniform density on the support box.

Two objective variants are supported. "log-ema" is the form above.
"paper-literal" replaces both log(ema) occurrences with ema itself
(objective constant -ema + 1, recovery constant -ema); the two variants
have identical parameter gradients and differ only through the recovery
constant.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._util import (
    STREAM_DATA,
    STREAM_DROPOUT,
    STREAM_INIT,
    STREAM_UNIFORM,
    atomic_write_bytes,
    atomic_write_text,
    consumer_rng,
)
from .data import Dataset, Domain, as_points
from .errors import DivergenceError, FormatError, ShapeError, ValidationError
from .nn import AdamState, MlpNetwork, adam_step

OBJECTIVE_VARIANTS = ("log-ema", "paper-literal")


@dataclass
class DvLossValue:
    """One evaluation of the training objective and its components."""

    total: float
    data_term: float      # mean log f over the data batch
    uniform_term: float   # mean f over the uniform batch
    ema_snapshot: float


def _positive_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(arr > 0.0):
        raise ValidationError(f"{name} entries must be positive")
    return arr


def dv_loss(f_data, f_unif, ema: float, variant: str = "log-ema") -> DvLossValue:
    """Evaluate the finite-sample objective for critic outputs f > 0.

    Training maximizes the returned total.
    """
    fd = _positive_vector(f_data, "f_data")
    fu = _positive_vector(f_unif, "f_unif")
    if not ema > 0.0:
        raise ValidationError(f"ema must be positive, got {ema}")
    if variant not in OBJECTIVE_VARIANTS:
        raise ValidationError(f"unknown objective variant {variant!r}")
    data_term = float(np.mean(np.log(fd)))
    uniform_term = float(np.mean(fu))
    if variant == "log-ema":
        total = data_term - uniform_term / ema - math.log(ema) + 1.0
    else:
        total = data_term - uniform_term / ema - ema + 1.0
    return DvLossValue(total=total, data_term=data_term,
                       uniform_term=uniform_term, ema_snapshot=float(ema))


def dv_loss_gradient_seed(f_data, f_unif, ema: float):
    """Objective gradients w.r.t. each critic output, ema held constant.

    Returns (d/df_data, d/df_unif) = (1/(N_D f_i), -1/(N_U ema)); the same
    for both objective variants, whose difference is constant in f.
    """
    fd = _positive_vector(f_data, "f_data")
    fu = _positive_vector(f_unif, "f_unif")
    if not ema > 0.0:
        raise ValidationError(f"ema must be positive, got {ema}")
    g_data = 1.0 / (fd.size * fd)
    g_unif = np.full(fu.size, -1.0 / (fu.size * ema))
    return g_data, g_unif


def update_ema(ema: float, batch_mean_f_unif: float, beta: float) -> float:
    """Exponential moving average step: beta*ema + (1-beta)*batch_mean."""
    if not (ema > 0.0 and batch_mean_f_unif > 0.0):
        raise ValidationError("ema inputs must be positive")
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta must be in [0, 1], got {beta}")
    return beta * ema + (1.0 - beta) * batch_mean_f_unif


def lr_schedule(epoch: int, base_lr: float, decay_factor: float = 10.0 ** -0.5,
                decay_every: int = 50) -> float:
    """Step decay: base_lr * decay_factor ** (epoch // decay_every)."""
    if epoch < 0:
        raise ValidationError(f"epoch must be >= 0, got {epoch}")
    return base_lr * decay_factor ** (epoch // decay_every)


@dataclass
class TrainConfig:
    """Hyperparameters of one training run; defaults are the desk-scale setup."""

    epochs: int = 200
    lr: float = 1e-3
    lr_decay_factor: float = 10.0 ** -0.5
    lr_decay_every: int = 50
    n_data: int = 32
    n_unif: int = 64
    beta: float = 0.9999
    epsilon: float = 1e-20
    seed: int = 0
    hidden: tuple[int, ...] = (512, 512, 512)
    dropout_p: float = 0.0
    objective_variant: str = "log-ema"

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValidationError(f"epochs must be >= 0, got {self.epochs}")
        if not self.lr > 0.0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if self.n_data < 1 or self.n_unif < 1 or self.lr_decay_every < 1:
            raise ValidationError("n_data, n_unif and lr_decay_every must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must be in [0, 1], got {self.beta}")
        if not self.epsilon > 0.0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValidationError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.objective_variant not in OBJECTIVE_VARIANTS:
            raise ValidationError(f"unknown objective variant {self.objective_variant!r}")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ValidationError(f"hidden widths must be >= 1, got {self.hidden}")


@dataclass
class TrainHistory:
    """Per-epoch record of the run: mean objective, ema, learning rate."""

    epoch: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    ema: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epoch)

    def append(self, epoch: int, objective: float, ema: float, lr: float) -> None:
        self.epoch.append(epoch)
        self.objective.append(objective)
        self.ema.append(ema)
        self.lr.append(lr)

    def to_csv(self, path) -> None:
        lines = ["epoch,objective,ema,lr"]
        for e, o, m, l in zip(self.epoch, self.objective, self.ema, self.lr):
            lines.append(f"{e},{o:.17g},{m:.17g},{l:.17g}")
        atomic_write_text(path, "\n".join(lines) + "\n")


_CKPT_MAGIC = b"DDDE"
_CKPT_VERSION = 1
_VARIANT_TAG = {"log-ema": 0, "paper-literal": 1}
_TAG_VARIANT = {v: k for k, v in _VARIANT_TAG.items()}


@dataclass
class DddeModel:
    """A trained density estimator: critic network plus recovery constants."""

    net: MlpNetwork
    ema: float
    beta: float
    epsilon: float
    domain: Domain
    objective_variant: str = "log-ema"

    def __post_init__(self):
        if not self.ema > 0.0:
            raise ValidationError(f"ema must be positive, got {self.ema}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must be in [0, 1], got {self.beta}")
        if not self.epsilon > 0.0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.objective_variant not in OBJECTIVE_VARIANTS:
            raise ValidationError(f"unknown objective variant {self.objective_variant!r}")
        if self.net.input_dim != self.domain.dim:
            raise ShapeError(
                f"network input dim {self.net.input_dim} != domain dim {self.domain.dim}")

    @property
    def input_dim(self) -> int:
        return self.net.input_dim

    def log_density(self, x):
        """Estimated log density at x (a d-vector or an (n, d) batch).

        Defined only inside the support box; outside points raise.
        """
        pts = np.asarray(x, dtype=np.float64)
        scalar = pts.ndim == 1
        if scalar:
            pts = pts[None, :]
        self.domain.require_inside(pts, "query")
        f = self.net.forward(pts)
        logf = np.log(np.maximum(f, self.epsilon))
        if self.objective_variant == "log-ema":
            out = logf + self.domain.log_u - math.log(self.ema)
        else:
            out = logf + self.domain.log_u - self.ema
        return float(out[0]) if scalar else out

    def anomaly_score(self, x):
        """Negative estimated log density; higher means more anomalous."""
        return -self.log_density(x)

    def sample_weights(self, dataset) -> np.ndarray:
        """Per-row weights proportional to estimated density, summing to 1."""
        ld = self.log_density(as_points(dataset))
        w = np.exp(ld - ld.max())
        return w / w.sum()

    def save(self, path) -> None:
        """Binary little-endian checkpoint; round-trips bit-exactly."""
        widths = self.net.layer_sizes
        blob = bytearray()
        blob += struct.pack("<4sII", _CKPT_MAGIC, _CKPT_VERSION, widths[0])
        blob += struct.pack("<I", len(widths) - 1)
        blob += struct.pack(f"<{len(widths) - 1}I", *widths[1:])
        blob += struct.pack("<dddB", self.epsilon, self.beta, self.ema,
                            _VARIANT_TAG[self.objective_variant])
        for lo, hi in zip(self.domain.lows, self.domain.highs):
            blob += struct.pack("<dd", lo, hi)
        for layer in self.net.layers:
            blob += np.ascontiguousarray(layer.weights, dtype="<f8").tobytes()
            blob += np.ascontiguousarray(layer.bias, dtype="<f8").tobytes()
        atomic_write_bytes(path, bytes(blob))

    @classmethod
    def load(cls, path) -> "DddeModel":
        with open(path, "rb") as fh:
            buf = fh.read()
        try:
            magic, version, dim = struct.unpack_from("<4sII", buf, 0)
            if magic != _CKPT_MAGIC:
                raise FormatError(f"{path}: not a DDDE checkpoint (magic {magic!r})")
            if version != _CKPT_VERSION:
                raise FormatError(f"{path}: unsupported checkpoint version {version}")
            off = 12
            (n_layers,) = struct.unpack_from("<I", buf, off)
            off += 4
            widths = list(struct.unpack_from(f"<{n_layers}I", buf, off))
            off += 4 * n_layers
            epsilon, beta, ema, tag = struct.unpack_from("<dddB", buf, off)
            off += 25
            if tag not in _TAG_VARIANT:
                raise FormatError(f"{path}: unknown objective variant tag {tag}")
            bounds = struct.unpack_from(f"<{2 * dim}d", buf, off)
            off += 16 * dim
            sizes = [dim] + widths
            net = MlpNetwork(sizes, epsilon=epsilon, rng=np.random.default_rng(0))
            for layer in net.layers:
                w_count = layer.n_out * layer.n_in
                layer.weights = np.frombuffer(
                    buf, dtype="<f8", count=w_count, offset=off
                ).reshape(layer.n_out, layer.n_in).copy()
                off += 8 * w_count
                layer.bias = np.frombuffer(
                    buf, dtype="<f8", count=layer.n_out, offset=off).copy()
                off += 8 * layer.n_out
        except (struct.error, ValueError) as exc:
            raise FormatError(f"{path}: truncated or corrupt checkpoint") from exc
        if off != len(buf):
            raise FormatError(f"{path}: {len(buf) - off} trailing bytes")
        domain = Domain(bounds[0::2], bounds[1::2])
        return cls(net=net, ema=ema, beta=beta, epsilon=epsilon, domain=domain,
                   objective_variant=_TAG_VARIANT[tag])


def train(dataset, domain: Domain, config: TrainConfig):
    """Run the stochastic training loop; returns (DddeModel, TrainHistory).

    Per iteration: draw a data minibatch (epoch-wise shuffle, contiguous
    slices) and a fresh uniform batch, fold the uniform batch mean into the
    EMA, evaluate the objective, and take one Adam ascent step. All
    randomness derives from config.seed through named substreams, so a
    (seed, config, dataset) triple reproduces the run bit for bit.
    """
    config.validate()
    pts = as_points(dataset)
    if domain.dim != pts.shape[1]:
        raise ShapeError(f"domain dim {domain.dim} != data dim {pts.shape[1]}")
    domain.require_inside(pts, "dataset")

    data_rng = consumer_rng(config.seed, STREAM_DATA)
    dropout_rng = consumer_rng(config.seed, STREAM_DROPOUT)
    unif_rng = consumer_rng(config.seed, STREAM_UNIFORM)

    net = MlpNetwork([pts.shape[1], *map(int, config.hidden), 1],
                     epsilon=config.epsilon, dropout_p=config.dropout_p,
                     rng=consumer_rng(config.seed, STREAM_INIT))
    state = AdamState(net.parameters())

    n = pts.shape[0]
    iters = -(-n // config.n_data)  # ceil
    ema = None
    history = TrainHistory()
    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.lr, config.lr_decay_factor, config.lr_decay_every)
        order = data_rng.permutation(n)
        total = 0.0
        for it in range(iters):
            idx = order[it * config.n_data:(it + 1) * config.n_data]
            xb = pts[idx]
            xu = domain.sample(config.n_unif, unif_rng)
            f = net.forward(np.vstack([xb, xu]), training=True, rng=dropout_rng)
            f = np.maximum(f, config.epsilon)  # belt-and-braces floor for the log
            f_d, f_u = f[:idx.size], f[idx.size:]
            mean_u = float(f_u.mean())
            ema = mean_u if ema is None else update_ema(ema, mean_u, config.beta)
            loss = dv_loss(f_d, f_u, ema, config.objective_variant)
            if not math.isfinite(loss.total):
                raise DivergenceError(epoch, it, loss.total)
            g_d, g_u = dv_loss_gradient_seed(f_d, f_u, ema)
            # Adam descends; ascend the objective by negating its gradient seed
            grads = net.backward(-np.concatenate([g_d, g_u]))
            adam_step(net.parameters(), grads, state, lr)
            total += loss.total
        history.append(epoch, total / iters, ema, lr)

    if ema is None:
        # epochs == 0: seed the EMA from one uniform batch so the model is
        # well-formed (ema > 0) without touching the parameters.
        f_u = net.forward(domain.sample(config.n_unif, unif_rng))
        ema = float(np.maximum(f_u, config.epsilon).mean())

    model = DddeModel(net=net, ema=ema, beta=config.beta, epsilon=config.epsilon,
                      domain=domain, objective_variant=config.objective_variant)
    return model, history
