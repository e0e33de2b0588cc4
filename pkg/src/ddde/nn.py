"""Minimal dense network with hand-written reverse-mode gradients.

The network is a stack of fully connected layers: ReLU on the hidden
layers, and an ELU(alpha=1) + 1 + epsilon head on the single output, so
the value it produces is always >= epsilon > 0. Everything is float64
numpy; gradients are derived by hand rather than through an autodiff
framework, which keeps the whole forward/backward pass deterministic and
easy to check against finite differences.
"""

import numpy as np

from .errors import ShapeError, ValidationError


def elu(x, alpha: float = 1.0):
    """ELU activation: x for x >= 0, alpha*(e^x - 1) below; alpha must be > 0.

    Continuous and monotone; the output is bounded below by -alpha.
    Accepts scalars or arrays.
    """
    arr = np.asarray(x, dtype=np.float64)
    # expm1 of the clipped argument avoids overflow warnings from the
    # unused positive branch and keeps the tail accurate near -alpha.
    out = np.where(arr >= 0.0, arr, alpha * np.expm1(np.minimum(arr, 0.0)))
    if np.ndim(x) == 0:
        return float(out)
    return out


def _elu_grad(y):
    # d/dy [elu(y, 1) + 1 + eps] = 1 for y >= 0, e^y for y < 0
    return np.where(y >= 0.0, 1.0, np.exp(np.minimum(y, 0.0)))


def dropout_mask(shape, p: float, rng: np.random.Generator):
    """Inverted-dropout mask: entries 0 with probability p, else 1/(1-p).

    Each entry has expectation 1, so the masked activation is an unbiased
    estimate of the unmasked one. `shape` may be an int (layer width) or a
    tuple for a whole batch.
    """
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"dropout probability must be in [0, 1), got {p}")
    keep = rng.random(shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


class DenseLayer:
    """One affine layer, weights (out, in), Glorot-uniform initialized."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        if n_in < 1 or n_out < 1:
            raise ValidationError(f"layer sizes must be >= 1, got {n_in}x{n_out}")
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.weights = rng.uniform(-limit, limit, size=(n_out, n_in))
        self.bias = np.zeros(n_out, dtype=np.float64)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


class MlpNetwork:
    """MLP critic: ReLU hidden layers, ELU(1) + 1 + epsilon positivity head.

    Dropout, when enabled, acts on the penultimate activation (input of the
    final linear layer) and only while the training flag is set. A forward
    pass with training=True caches the activations needed by `backward`;
    the cache is consumed by the backward pass. A network used purely for
    evaluation holds no mutable state.
    """

    def __init__(self, layer_sizes, epsilon: float = 1e-20, dropout_p: float = 0.0,
                 rng: np.random.Generator | None = None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2:
            raise ValidationError("need at least an input and an output layer")
        if sizes[-1] != 1:
            raise ValidationError(f"output width must be 1, got {sizes[-1]}")
        if not epsilon > 0.0:
            raise ValidationError(f"epsilon must be positive, got {epsilon}")
        if not 0.0 <= dropout_p < 1.0:
            raise ValidationError(f"dropout probability must be in [0, 1), got {dropout_p}")
        if rng is None:
            rng = np.random.default_rng(0)
        self.layers = [DenseLayer(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.epsilon = float(epsilon)
        self.dropout_p = float(dropout_p)
        self._cache = None

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [w0, b0, w1, b1, ...]; gradients use the same order."""
        return [arr for layer in self.layers for arr in (layer.weights, layer.bias)]

    def forward(self, batch, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Map an (n, d) batch to n positive scalars (each >= epsilon).

        With training=True the activations are cached for `backward`, and
        `rng` is required whenever dropout is active.
        """
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError(f"batch must be 2-d (n, {self.input_dim}), got ndim={x.ndim}")
        if x.shape[1] != self.input_dim:
            raise ShapeError(
                f"batch has {x.shape[1]} columns, network expects {self.input_dim}")
        use_dropout = training and self.dropout_p > 0.0
        if use_dropout and rng is None:
            raise ValidationError("training forward with dropout_p > 0 requires an rng")

        inputs = []       # input of each layer
        pre_hidden = []   # pre-activation of each hidden layer
        a = x
        for layer in self.layers[:-1]:
            inputs.append(a)
            z = a @ layer.weights.T + layer.bias
            pre_hidden.append(z)
            a = np.maximum(z, 0.0)
        mask = None
        if use_dropout:
            mask = dropout_mask(a.shape, self.dropout_p, rng)
            a = a * mask
        inputs.append(a)
        y = (a @ self.layers[-1].weights.T + self.layers[-1].bias)[:, 0]
        f = elu(y) + 1.0 + self.epsilon

        self._cache = (inputs, pre_hidden, mask, y) if training else None
        return f

    def backward(self, upstream_grad) -> list[np.ndarray]:
        """Gradients of sum(upstream_grad * forward(batch)) w.r.t. every parameter.

        Requires a prior forward(..., training=True); the cached activations
        are consumed. Returns arrays shaped like `parameters()`.
        """
        if self._cache is None:
            raise ValidationError("backward() requires a prior forward(training=True)")
        inputs, pre_hidden, mask, y = self._cache
        self._cache = None

        up = np.asarray(upstream_grad, dtype=np.float64)
        n = inputs[0].shape[0]
        if up.shape != (n,):
            raise ShapeError(f"upstream gradient must have shape ({n},), got {up.shape}")

        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        # through the head, then the final linear layer
        dz = up * _elu_grad(y)                      # (n,)
        last = self.layers[-1]
        grads[-2] = (dz[None, :] @ inputs[-1])      # (1, width)
        grads[-1] = np.array([dz.sum()])
        da = dz[:, None] * last.weights             # (n, width)
        if mask is not None:
            da = da * mask
        for i in range(len(self.layers) - 2, -1, -1):
            dzh = da * (pre_hidden[i] > 0.0)
            grads[2 * i] = dzh.T @ inputs[i]
            grads[2 * i + 1] = dzh.sum(axis=0)
            if i > 0:
                da = dzh @ self.layers[i].weights
        return grads


class AdamState:
    """Bias-corrected Adam accumulators for a list of parameter arrays."""

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        # reusable buffers so a step allocates nothing
        self._scratch = [np.empty_like(p) for p in params]


def adam_step(params, grads, state: AdamState, lr: float) -> None:
    """One Adam update, in place on `params` (descent direction of `grads`)."""
    if not lr > 0.0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ShapeError("params/grads/state length mismatch")
    state.t += 1
    corr1 = 1.0 - state.beta1 ** state.t
    root_corr2 = np.sqrt(1.0 - state.beta2 ** state.t)
    for p, g, m, v, sc in zip(params, grads, state.m, state.v, state._scratch):
        np.multiply(g, g, out=sc)
        sc *= 1.0 - state.beta2
        v *= state.beta2
        v += sc
        np.multiply(g, 1.0 - state.beta1, out=sc)
        m *= state.beta1
        m += sc
        # p -= lr * (m / corr1) / (sqrt(v / corr2) + eps), without temporaries
        np.sqrt(v, out=sc)
        sc /= root_corr2
        sc += state.eps
        np.divide(m, sc, out=sc)
        sc *= lr / corr1
        p -= sc
