"""Positive-definite kernels and the Lipschitz constants they induce.

A kernel supplies evaluation, Gram matrices, the gradient in its first
argument and `lipschitz()`, the supremum of that gradient's norm taken over
both arguments. Functions in the kernel's RKHS with norm at most B are then
Lipschitz with constant sqrt(2 L_kappa) B.

Only the squared-exponential kernel is implemented:

    k(x, x') = sigma_f^2 exp(-|x - x'|^2 / (2 l^2))
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InputError


class Kernel(ABC):
    """Interface every kernel implements.

    Implementations expose `input_dim`.
    """

    @abstractmethod
    def evaluate(self, x, x2):
        pass

    @abstractmethod
    def gram(self, X, Y=None):
        pass

    @abstractmethod
    def gradient(self, x, x2):
        """Gradient of k(x, x2) with respect to x."""

    @abstractmethod
    def lipschitz(self):
        """sup over x, x2 of |gradient(x, x2)|."""

    @abstractmethod
    def diagonal(self, X):
        """k(x, x) for every row of X."""

    def as_vector(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise InputError("expected a vector of dimension {}, got shape {}".format(
                self.input_dim, x.shape))
        return x

    def as_rows(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and self.input_dim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise InputError("expected rows of dimension {}, got shape {}".format(
                self.input_dim, X.shape))
        return X


@dataclass(frozen=True)
class KernelSpec(Kernel):
    """Squared-exponential kernel hyperparameters."""
    sigma_f: float
    length_scale: float
    input_dim: int

    def __post_init__(self):
        if not (self.sigma_f > 0 and math.isfinite(self.sigma_f)):
            raise InputError("sigma_f must be positive, got {!r}".format(self.sigma_f))
        if not (self.length_scale > 0 and math.isfinite(self.length_scale)):
            raise InputError("length_scale must be positive, got {!r}".format(self.length_scale))
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise InputError("input_dim must be a positive integer, got {!r}".format(self.input_dim))

    @property
    def variance(self):
        return self.sigma_f ** 2

    def evaluate(self, x, x2):
        x = self.as_vector(x)
        x2 = self.as_vector(x2)
        d = x - x2
        return self.variance * math.exp(-0.5 * float(d @ d) / self.length_scale ** 2)

    def gram(self, X, Y=None):
        X = self.as_rows(X)
        Y = X if Y is None else self.as_rows(Y)
        sq = cdist(X, Y, "sqeuclidean")
        return self.variance * np.exp(-0.5 * sq / self.length_scale ** 2)

    def gradient(self, x, x2):
        x = self.as_vector(x)
        x2 = self.as_vector(x2)
        return -(x - x2) / self.length_scale ** 2 * self.evaluate(x, x2)

    def lipschitz(self):
        # |grad| = sigma_f^2 r exp(-r^2 / 2l^2) / l^2, maximal at r = l
        return self.variance / (self.length_scale * math.sqrt(math.e))

    def diagonal(self, X):
        X = self.as_rows(X)
        return np.full(X.shape[0], self.variance)

    def to_dict(self):
        return {
            "sigma_f": self.sigma_f,
            "length_scale": self.length_scale,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["sigma_f"]), float(d["length_scale"]), int(d["input_dim"]))


@dataclass(frozen=True)
class LipschitzInfo:
    kappa_lipschitz: float
    rkhs_bound: float
    f_lipschitz: float


def kernel_eval(spec, x, x2):
    return spec.evaluate(x, x2)


def gram_matrix(spec, inputs):
    return spec.gram(inputs)


def kernel_gradient(spec, x, x2):
    return spec.gradient(x, x2)


def kernel_lipschitz(spec):
    return spec.lipschitz()


def f_lipschitz(spec, B):
    """Lipschitz constant of any f with RKHS norm at most B.
    """
    if not B >= 0:
        raise InputError("RKHS bound must be non-negative, got {!r}".format(B))
    L_kappa = kernel_lipschitz(spec)
    return LipschitzInfo(
        kappa_lipschitz=L_kappa,
        rkhs_bound=float(B),
        f_lipschitz=math.sqrt(2 * L_kappa) * B)
