"""Small affine/ReLU networks and gradients of MMD losses through them.

A critic ``h`` maps data to features; an optional generator ``G`` maps
noise to data.  :func:`mmd_loss_grad` differentiates the unbiased squared
MMD between ``h(X)`` and ``h(G(Z))`` with respect to every parameter by
reverse-mode accumulation.  The derivative of ReLU at exactly 0 is taken
to be 0.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError, NumericalError
from .estimators import _mmd2_u
from .numeric import as_features, as_rng, map_ordered

__all__ = [
    "Affine",
    "Relu",
    "Net",
    "net_forward",
    "GradReport",
    "KinkProximityError",
    "GaussianSampler",
    "mmd_loss_grad",
    "finite_diff_check",
    "random_gradcheck",
    "gradient_unbiasedness_mc",
]


class KinkProximityError(NumericalError):
    """Some ReLU pre-activation is too close to 0 for finite differences."""


@dataclass(frozen=True)
class Affine:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weight, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.bias, dtype=np.float64))
        if b.shape != (w.shape[0],):
            raise InputError(f"bias shape {b.shape} does not match weight {w.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


@dataclass(frozen=True)
class Relu:
    pass


class Net:
    """Feedforward network made of :class:`Affine` and :class:`Relu` layers."""

    def __init__(self, layers, input_dim):
        self.layers = tuple(layers)
        self.input_dim = int(input_dim)
        dim = self.input_dim
        for layer in self.layers:
            if isinstance(layer, Affine):
                if layer.in_dim != dim:
                    raise InputError(f"layer expects {layer.in_dim} inputs, gets {dim}")
                dim = layer.out_dim
            elif not isinstance(layer, Relu):
                raise InputError(f"unsupported layer {layer!r}")
        self.output_dim = dim

    @classmethod
    def random(cls, sizes, rng, bias_scale=0.1):
        """He-initialised net with ReLU between consecutive affine layers."""
        rng = as_rng(rng)
        layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if i:
                layers.append(Relu())
            w = rng.normal((b, a)) * np.sqrt(2.0 / a)
            layers.append(Affine(w, bias_scale * rng.normal(b)))
        return cls(layers, sizes[0])

    def __repr__(self):
        dims = [self.input_dim] + [l.out_dim for l in self.layers if isinstance(l, Affine)]
        return f"Net({'->'.join(map(str, dims))})"

    @property
    def n_params(self):
        return sum(l.weight.size + l.bias.size for l in self.layers if isinstance(l, Affine))

    def pack(self):
        parts = []
        for l in self.layers:
            if isinstance(l, Affine):
                parts += [l.weight.ravel(), l.bias]
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, vec):
        """Copy of this net with parameters taken from the flat vector ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise InputError(f"expected {self.n_params} parameters, got {vec.shape}")
        layers, k = [], 0
        for l in self.layers:
            if isinstance(l, Affine):
                nw, nb = l.weight.size, l.bias.size
                w = vec[k : k + nw].reshape(l.weight.shape)
                b = vec[k + nw : k + nw + nb]
                layers.append(Affine(w.copy(), b.copy()))
                k += nw + nb
            else:
                layers.append(l)
        return Net(layers, self.input_dim)

    def forward(self, X):
        return self._forward(X)[0]

    def _forward(self, X):
        X = as_features(X, "input")
        if X.shape[1] != self.input_dim:
            raise InputError(f"net expects {self.input_dim} inputs, got {X.shape[1]}")
        cache = []
        for l in self.layers:
            cache.append(X)
            X = X @ l.weight.T + l.bias if isinstance(l, Affine) else np.maximum(X, 0.0)
        return X, cache

    def _backward(self, cache, grad_out):
        """Parameter gradient (packed order) and input gradient."""
        grads = []
        g = grad_out
        for l, inp in zip(reversed(self.layers), reversed(cache)):
            if isinstance(l, Affine):
                grads.append((g.T @ inp, g.sum(axis=0)))
                g = g @ l.weight
            else:
                g = g * (inp > 0)
        parts = []
        for gw, gb in reversed(grads):
            parts += [gw.ravel(), gb]
        flat = np.concatenate(parts) if parts else np.zeros(0)
        return flat, g

    def preactivations(self, X):
        """Inputs to every ReLU layer, for kink checks."""
        _, cache = self._forward(X)
        return [c for l, c in zip(self.layers, cache) if isinstance(l, Relu)]


def net_forward(net, X):
    return net.forward(X)


@dataclass(frozen=True)
class GradReport:
    analytic: np.ndarray
    comparison: np.ndarray
    max_rel_error: float
    cosine: float
    stderr: np.ndarray = None
    within_3se: float = None

    def to_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
        return out


def _loss_and_grad(critic, generator, spec, X, Z, want_loss=True):
    Y, gen_cache = generator._forward(Z) if generator is not None else (as_features(Z, "Z"), None)
    Fx, cx = critic._forward(X)
    Fy, cy = critic._forward(Y)
    m, n = Fx.shape[0], Fy.shape[0]
    if m < 2 or n < 2:
        raise InputError("need at least two samples per side")
    Wxx = np.full((m, m), 1.0 / (m * (m - 1)))
    np.fill_diagonal(Wxx, 0.0)
    Wyy = np.full((n, n), 1.0 / (n * (n - 1)))
    np.fill_diagonal(Wyy, 0.0)
    Wxy = np.full((m, n), -2.0 / (m * n))
    # anchor terms of the distance kernel cancel across the three blocks
    a, b = spec.weighted_grads(Fx, Fx, Wxx, anchor=False)
    dFx = a + b
    a, b = spec.weighted_grads(Fy, Fy, Wyy, anchor=False)
    dFy = a + b
    a, b = spec.weighted_grads(Fx, Fy, Wxy, anchor=False)
    dFx += a
    dFy += b
    gx, _ = critic._backward(cx, dFx)
    gy, dY = critic._backward(cy, dFy)
    grad = gx + gy
    if generator is not None:
        gpsi, _ = generator._backward(gen_cache, dY)
        grad = np.concatenate([grad, gpsi])
    loss = float(_mmd2_u(spec, Fx, Fy)) if want_loss else None
    return loss, grad


def mmd_loss_grad(critic, generator, spec, X, Z):
    """Unbiased squared MMD between ``h(X)`` and ``h(G(Z))`` and its gradient.

    Without a generator ``Z`` is used directly as the second sample.  The
    gradient is laid out as the critic's packed parameters followed by the
    generator's.
    """
    return _loss_and_grad(critic, generator, spec, X, Z)


def _params(critic, generator):
    theta = critic.pack()
    psi = generator.pack() if generator is not None else np.zeros(0)
    return np.concatenate([theta, psi]), theta.size


def _rel_error(a, f):
    # mixed relative error: coordinates far below the gradient's overall
    # scale are compared against that scale instead of their own size
    scale = max(np.abs(a).max(), np.abs(f).max(), 1e-300)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-3 * scale)
    return float(np.max(np.abs(a - f) / denom))


def _cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def _kink_margin(critic, generator, X, Z):
    pre = []
    if generator is not None:
        pre += generator.preactivations(Z)
        Y = generator.forward(Z)
    else:
        Y = Z
    pre += critic.preactivations(X) + critic.preactivations(Y)
    return min((np.abs(p).min() for p in pre), default=np.inf)


def finite_diff_check(critic, generator, spec, X, Z, epsilon=1e-5, analytic=None):
    """Compare the analytic gradient with central differences of step ``epsilon``.

    Raises :class:`KinkProximityError` when a ReLU pre-activation lies
    within ``10 * epsilon`` of 0.  ``analytic`` overrides the gradient
    under test (used to check that the harness catches bad gradients).
    """
    if _kink_margin(critic, generator, X, Z) < 10 * epsilon:
        raise KinkProximityError("ReLU pre-activation within 10*epsilon of zero")
    vec, n_theta = _params(critic, generator)
    if analytic is None:
        analytic = _loss_and_grad(critic, generator, spec, X, Z, want_loss=False)[1]

    def loss_at(v):
        c = critic.unpack(v[:n_theta])
        g = generator.unpack(v[n_theta:]) if generator is not None else None
        return _loss_and_grad(c, g, spec, X, Z)[0]

    fd = np.empty_like(vec)
    for i in range(vec.size):
        step = np.zeros_like(vec)
        step[i] = epsilon
        fd[i] = (loss_at(vec + step) - loss_at(vec - step)) / (2 * epsilon)
    return GradReport(analytic, fd, _rel_error(analytic, fd), _cosine(analytic, fd))


def random_gradcheck(critic_sizes, spec, rng, n=16, generator_sizes=None, epsilon=1e-5, max_retries=20):
    """Finite-difference check on randomly initialised nets and Gaussian inputs.

    Inputs are redrawn (up to ``max_retries`` times) whenever a ReLU unit
    sits too close to its kink.
    """
    rng = as_rng(rng)
    critic = Net.random(critic_sizes, rng)
    generator = Net.random(generator_sizes, rng) if generator_sizes else None
    if generator is not None and generator.output_dim != critic.input_dim:
        raise InputError("generator output must match critic input")
    z_dim = generator.input_dim if generator is not None else critic.input_dim
    for _ in range(max_retries):
        X = rng.normal((n, critic.input_dim)) + 0.5
        Z = rng.normal((n, z_dim))
        try:
            return finite_diff_check(critic, generator, spec, X, Z, epsilon)
        except KinkProximityError:
            continue
    raise KinkProximityError(f"no kink-free inputs after {max_retries} draws")


@dataclass(frozen=True)
class GaussianSampler:
    """Rows ``mean + scale * N(0, I)``."""

    mean: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=np.float64)))

    def sample(self, rng, n):
        return self.mean + self.scale * rng.normal((n, self.mean.size))


def gradient_unbiasedness_mc(
    critic,
    generator,
    spec,
    data,
    noise,
    m,
    reps,
    rng,
    proxy_n=10**5,
    proxy_block=1000,
    threads=1,
):
    """Average minibatch gradients and compare with a large-sample gradient.

    ``reps`` minibatches of ``m`` draws from ``data`` and ``noise`` (both
    :class:`GaussianSampler`) give a mean gradient and its standard error.
    The reference is the gradient of the unbiased estimate on ``proxy_n``
    draws per side, averaged over blocks of ``proxy_block`` (same first-order
    variance as the full-sample estimate at a fraction of the cost).  A
    coordinate agrees when the two means are within 3 combined standard
    errors.
    """
    if m < 2 or reps < 2:
        raise InputError("need m >= 2 and reps >= 2")
    rng = as_rng(rng)

    def grad_at(stream, size):
        X = data.sample(stream, size)
        Z = noise.sample(stream, size)
        return _loss_and_grad(critic, generator, spec, X, Z, want_loss=False)[1]

    mini = np.array(map_ordered(lambda r: grad_at(rng.derive(r), m), range(reps), threads))
    proxy_rng = rng.derive(reps + 1)
    n_blocks = max(proxy_n // proxy_block, 2)
    big = np.array(map_ordered(lambda b: grad_at(proxy_rng.derive(b), proxy_block), range(n_blocks), threads))

    mean, ref = mini.mean(axis=0), big.mean(axis=0)
    se = mini.std(axis=0, ddof=1) / np.sqrt(reps)
    ref_se = big.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    combined = np.sqrt(se**2 + ref_se**2)
    within = float(np.mean(np.abs(mean - ref) <= 3.0 * combined))
    return GradReport(mean, ref, _rel_error(mean, ref), _cosine(mean, ref), combined, within)
