"""Kernel families, Gram matrices and analytic gradients.

Every kernel class implements three methods:

``matrix(X, Y)``
    Gram matrix with entries ``k(x_i, y_j)``.
``weighted_grads(X, Y, W, anchor=True)``
    ``(GX, GY)`` with ``GX[i] = sum_j W[i, j] * grad_1 k(x_i, y_j)`` and
    ``GY[j] = sum_i W[i, j] * grad_2 k(x_i, y_j)``.  Only pairs with a
    nonzero weight are differentiated, so a zero diagonal weight skips the
    coincident pairs of a within-sample Gram matrix.  ``anchor=False`` drops
    the terms of the distance kernel that depend on ``z0`` alone; callers use
    it where those terms cancel exactly (MMD losses, witness gradients).

The module-level :func:`kernel_value`, :func:`kernel_matrix` and
:func:`kernel_grad` dispatch to these methods.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NonDifferentiableError
from .numeric import as_features

__all__ = [
    "DEFAULT_SIGMAS",
    "DEFAULT_ALPHAS",
    "RbfMixture",
    "RqMixture",
    "Dot",
    "RqDot",
    "Distance",
    "Poly",
    "kernel_value",
    "kernel_matrix",
    "kernel_grad",
    "parse_kernel",
    "sq_distances",
]

DEFAULT_SIGMAS = (2.0, 5.0, 10.0, 20.0, 40.0, 80.0)
DEFAULT_ALPHAS = (0.2, 0.5, 1.0, 2.0, 5.0)


def sq_distances(X, Y):
    """Pairwise squared Euclidean distances, clamped at zero."""
    xx = np.einsum("ij,ij->i", X, X)
    yy = np.einsum("ij,ij->i", Y, Y)
    D = xx[:, None] + yy[None, :] - 2.0 * (X @ Y.T)
    np.maximum(D, 0.0, out=D)
    return D


def _positive_tuple(values, name):
    values = tuple(float(v) for v in values)
    if not values:
        raise InputError(f"{name} must be non-empty")
    if any(not (v > 0 and np.isfinite(v)) for v in values):
        raise InputError(f"{name} must all be positive, got {values}")
    return values


class _Radial:
    """Kernels of the form k(x, y) = phi(||x - y||^2)."""

    def _phi(self, D):
        raise NotImplementedError

    def _dphi(self, D):
        raise NotImplementedError

    def matrix(self, X, Y):
        return self._phi(sq_distances(X, Y))

    def weighted_grads(self, X, Y, W, anchor=True):
        C = W * self._dphi(sq_distances(X, Y))
        GX = 2.0 * (C.sum(axis=1)[:, None] * X - C @ Y)
        GY = 2.0 * (C.sum(axis=0)[:, None] * Y - C.T @ X)
        return GX, GY


@dataclass(frozen=True)
class RbfMixture(_Radial):
    """Sum over lengthscales of exp(-||x - y||^2 / (2 sigma^2))."""

    sigmas: tuple = DEFAULT_SIGMAS

    def __post_init__(self):
        object.__setattr__(self, "sigmas", _positive_tuple(self.sigmas, "sigmas"))

    def _phi(self, D):
        out = np.zeros_like(D)
        for s in self.sigmas:
            out += np.exp(D * (-0.5 / s**2))
        return out

    def _dphi(self, D):
        out = np.zeros_like(D)
        for s in self.sigmas:
            g = -0.5 / s**2
            out += g * np.exp(g * D)
        return out


@dataclass(frozen=True)
class RqMixture(_Radial):
    """Sum over alphas of (1 + ||x - y||^2 / (2 alpha))^(-alpha)."""

    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        object.__setattr__(self, "alphas", _positive_tuple(self.alphas, "alphas"))

    def _phi(self, D):
        out = np.zeros_like(D)
        for a in self.alphas:
            out += (1.0 + D / (2.0 * a)) ** (-a)
        return out

    def _dphi(self, D):
        out = np.zeros_like(D)
        for a in self.alphas:
            out -= 0.5 * (1.0 + D / (2.0 * a)) ** (-a - 1.0)
        return out


@dataclass(frozen=True)
class Dot:
    """Linear kernel <x, y>."""

    def matrix(self, X, Y):
        return X @ Y.T

    def weighted_grads(self, X, Y, W, anchor=True):
        return W @ Y, W.T @ X


@dataclass(frozen=True)
class RqDot:
    """RQ mixture plus the linear kernel."""

    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        object.__setattr__(self, "alphas", _positive_tuple(self.alphas, "alphas"))

    @property
    def parts(self):
        return RqMixture(self.alphas), Dot()

    def matrix(self, X, Y):
        rq, dot = self.parts
        return rq.matrix(X, Y) + dot.matrix(X, Y)

    def weighted_grads(self, X, Y, W, anchor=True):
        rq, dot = self.parts
        gx1, gy1 = rq.weighted_grads(X, Y, W)
        gx2, gy2 = dot.weighted_grads(X, Y, W)
        return gx1 + gx2, gy1 + gy2


@dataclass(frozen=True)
class Poly:
    """(gamma <x, y> + coef)^degree; ``gamma=None`` means 1/d at evaluation time."""

    degree: int = 3
    gamma: float = None
    coef: float = 1.0

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InputError(f"degree must be a positive integer, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        if self.gamma is not None and not self.gamma > 0:
            raise InputError(f"gamma must be positive, got {self.gamma}")

    def _gamma(self, d):
        return 1.0 / d if self.gamma is None else float(self.gamma)

    def matrix(self, X, Y):
        base = self._gamma(X.shape[1]) * (X @ Y.T) + self.coef
        return base**self.degree

    def weighted_grads(self, X, Y, W, anchor=True):
        g = self._gamma(X.shape[1])
        base = g * (X @ Y.T) + self.coef
        C = W * (self.degree * g) * base ** (self.degree - 1)
        return C @ Y, C.T @ X


@dataclass(frozen=True)
class Distance:
    """Distance-induced kernel 0.5 [rho(x, z0) + rho(y, z0) - rho(x, y)], rho = ||.||^beta.

    ``z0=None`` means the origin.  Not translation invariant, although the
    MMD it induces is.  For ``beta < 1`` rho is only a semimetric.
    """

    beta: float = 1.0
    z0: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.beta <= 2:
            raise InputError(f"beta must lie in (0, 2], got {self.beta}")
        if self.z0 is not None:
            z0 = np.asarray(self.z0, dtype=np.float64).ravel()
            if not np.all(np.isfinite(z0)):
                raise InputError("z0 must be finite")
            object.__setattr__(self, "z0", z0)

    def _anchor(self, d):
        if self.z0 is None:
            return np.zeros(d)
        if self.z0.shape[0] != d:
            raise InputError(f"z0 has dimension {self.z0.shape[0]}, data has {d}")
        return self.z0

    def _rho(self, D2):
        if self.beta == 2:
            return D2
        if self.beta == 1:
            return np.sqrt(D2)
        return D2 ** (0.5 * self.beta)

    def _anchor_rho(self, X):
        diff = X - self._anchor(X.shape[1])
        return self._rho(np.einsum("ij,ij->i", diff, diff))

    def matrix(self, X, Y):
        ax = self._anchor_rho(X)
        ay = self._anchor_rho(Y)
        return 0.5 * (ax[:, None] + ay[None, :] - self._rho(sq_distances(X, Y)))

    def _drho_coeff(self, D2, where):
        """rho'(r^2) * 2, i.e. grad_x ||x - y||^beta = coeff * (x - y)."""
        if self.beta == 2:
            return np.full_like(D2, 2.0)
        out = np.zeros_like(D2)
        if np.any(where & (D2 == 0.0)):
            raise NonDifferentiableError(
                f"distance kernel with beta={self.beta} is not differentiable at coincident points"
            )
        np.power(D2, 0.5 * self.beta - 1.0, out=out, where=where)
        out *= self.beta
        return out

    def weighted_grads(self, X, Y, W, anchor=True):
        D2 = sq_distances(X, Y)
        # the expanded-form distances can round a true coincidence to a tiny
        # positive number; recompute exactly where it matters
        near = (W != 0) & (D2 <= 1e-12 * (1.0 + D2.max()))
        if near.any():
            i, j = np.nonzero(near)
            D2[i, j] = np.sum((X[i] - Y[j]) ** 2, axis=1)
        C = -0.5 * W * self._drho_coeff(D2, W != 0)
        GX = C.sum(axis=1)[:, None] * X - C @ Y
        GY = C.sum(axis=0)[:, None] * Y - C.T @ X
        if anchor:
            GX += W.sum(axis=1)[:, None] * self._anchor_grad(X)
            GY += W.sum(axis=0)[:, None] * self._anchor_grad(Y)
        return GX, GY

    def _anchor_grad(self, X):
        """Gradient of 0.5 rho(x, z0) for each row."""
        diff = X - self._anchor(X.shape[1])
        r2 = np.einsum("ij,ij->i", diff, diff)
        if self.beta == 2:
            return diff
        zero = r2 == 0.0
        if np.any(zero) and self.beta <= 1:
            raise NonDifferentiableError(
                f"distance kernel with beta={self.beta} is not differentiable at z0"
            )
        coeff = np.zeros_like(r2)
        np.power(r2, 0.5 * self.beta - 1.0, out=coeff, where=~zero)
        return 0.5 * self.beta * coeff[:, None] * diff


def _pair(x, y):
    x = as_features(np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :], "x")
    y = as_features(np.atleast_1d(np.asarray(y, dtype=np.float64))[None, :], "y")
    if x.shape[1] != y.shape[1]:
        raise InputError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return x, y


def kernel_value(spec, x, y):
    x, y = _pair(x, y)
    if isinstance(spec, Distance):
        # exact differences instead of the expanded form: keeps k(x, y) == k(y, x)
        ax, ay = spec._anchor_rho(x)[0], spec._anchor_rho(y)[0]
        return float(0.5 * (ax + ay - spec._rho(np.sum((x - y) ** 2))))
    if isinstance(spec, (RbfMixture, RqMixture)):
        return float(spec._phi(np.array([[np.sum((x - y) ** 2)]]))[0, 0])
    if isinstance(spec, RqDot):
        rq, dot = spec.parts
        return kernel_value(rq, x[0], y[0]) + kernel_value(dot, x[0], y[0])
    return float(spec.matrix(x, y)[0, 0])


def kernel_matrix(spec, X, Y=None):
    """Gram matrix between the rows of ``X`` and ``Y`` (``Y`` defaults to ``X``)."""
    X = as_features(X, "X")
    Y = X if Y is None else as_features(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    K = spec.matrix(X, Y)
    if Y is X:
        K = 0.5 * (K + K.T)
    return K


def kernel_grad(spec, x, y):
    """Gradients of ``k(x, y)`` with respect to ``x`` and ``y``."""
    x, y = _pair(x, y)
    gx, gy = spec.weighted_grads(x, y, np.ones((1, 1)))
    return gx[0], gy[0]


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def parse_kernel(text, sigmas=None, alphas=None, beta=None):
    """Build a kernel from a CLI string such as ``rbf:2,5,10`` or ``dist:beta=1``.

    ``sigmas``/``alphas``/``beta`` override or fill in missing parameters.
    """
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "rbf":
        return RbfMixture(_floats(arg) if arg else (sigmas or DEFAULT_SIGMAS))
    if name == "rq":
        return RqMixture(_floats(arg) if arg else (alphas or DEFAULT_ALPHAS))
    if name in ("rq-dot", "rqdot"):
        return RqDot(_floats(arg) if arg else (alphas or DEFAULT_ALPHAS))
    if name == "dot":
        return Dot()
    opts = {}
    for item in filter(None, (a.strip() for a in arg.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InputError(f"expected key=value in kernel string, got {item!r}")
        opts[key.strip()] = value.strip()
    try:
        if name in ("dist", "distance"):
            b = float(opts.pop("beta", beta if beta is not None else 1.0))
            kernel = Distance(beta=b)
        elif name == "poly":
            kernel = Poly(
                degree=int(opts.pop("deg", 3)),
                gamma=float(opts["gamma"]) if "gamma" in opts else None,
                coef=float(opts.pop("coef", 1.0)),
            )
            opts.pop("gamma", None)
        else:
            raise InputError(f"unknown kernel {name!r}")
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad kernel parameters in {text!r}: {exc}") from None
    if opts:
        raise InputError(f"unknown kernel options {sorted(opts)} in {text!r}")
    return kernel
