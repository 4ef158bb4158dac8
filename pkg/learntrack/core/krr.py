"""Kernel ridge regression with a deterministic error envelope.

The model minimizes the data term (1/N) sum (z - mu(x))^2 plus w_bar^2 |mu|^2
in the RKHS. Its solution is mu(x) = k(x)^T alpha with

    alpha = (K + N w_bar^2 I)^-1 z

and for any f with RKHS norm at most B, observed with noise within w_bar,

    |mu(x) - f(x)| <= beta P(x)

where P is the power function and beta^2 = B^2 - z^T (K + N w_bar^2 I)^-1 z + 1.

The regularized Gram matrix is Cholesky factorized once at fit time and
the factor serves both alpha and every power-function query.

A model with no data predicts 0 everywhere, has P(x) = sqrt(k(x, x)) and
beta = sqrt(B^2 + 1).
"""
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import InputError, FittingError, NumericalError
from ..utils import chunked
from . import signals
from .kernels import KernelSpec

logger = logging.getLogger(__name__)

# slack below zero tolerated in P(x)^2 before it counts as inconsistent
POWER_RADICAND_TOLERANCE = 1e-12

# alpha restored from a serialized model must agree with a refit to this
ALPHA_RESTORE_TOLERANCE = 1e-8

PREDICT_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training pairs (x_tilde, z) and the bound w_bar on the target noise."""
    inputs: np.ndarray
    targets: np.ndarray
    noise_bound: float

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.ndim != 2:
            raise InputError("inputs must be a 2-d array, got shape {}".format(inputs.shape))
        if inputs.shape[0] != targets.shape[0]:
            raise InputError("{} input rows but {} targets".format(inputs.shape[0], targets.shape[0]))
        if not self.noise_bound >= 0:
            raise InputError("noise_bound must be non-negative, got {!r}".format(self.noise_bound))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "noise_bound", float(self.noise_bound))

    @property
    def size(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    @classmethod
    def empty(cls, input_dim, noise_bound=0.0):
        return cls(np.zeros((0, input_dim)), np.zeros(0), noise_bound)

    def concat(self, other):
        if other.input_dim != self.input_dim:
            raise InputError("cannot join datasets of dimension {} and {}".format(
                self.input_dim, other.input_dim))
        return Dataset(
            np.vstack([self.inputs, other.inputs]),
            np.concatenate([self.targets, other.targets]),
            max(self.noise_bound, other.noise_bound))

    def head(self, size):
        return Dataset(self.inputs[:size], self.targets[:size], self.noise_bound)


@dataclass(frozen=True, eq=False)
class KrrModel:
    dataset: Dataset
    kernel: KernelSpec
    alpha: np.ndarray
    gram_factor: object
    beta: float
    rkhs_bound: float
    beta_radicand: float = 0.0
    beta_clamped: bool = False
    fit_residual: float = 0.0

    @property
    def size(self):
        return self.dataset.size

    @property
    def beta_fallback(self):
        """Data-independent coefficient sqrt(B^2 + 1)."""
        return math.sqrt(self.rkhs_bound ** 2 + 1)

    @property
    def certificate_beta(self):
        """beta to feed a stability certificate.

        A clamped beta means B is inconsistent with the data; the
        data-independent coefficient is used in its place.
        """
        if self.beta_clamped:
            return self.beta_fallback
        return self.beta

    def predict(self, x):
        x = self.kernel.as_vector(x)
        if self.size == 0:
            return 0.0
        k = self.kernel.gram(self.dataset.inputs, x.reshape(1, -1))[:, 0]
        return float(k @ self.alpha)

    def predict_many(self, X):
        X = self.kernel.as_rows(X)
        if self.size == 0:
            return np.zeros(X.shape[0])
        out = [self.kernel.gram(chunk, self.dataset.inputs) @ self.alpha
               for chunk in chunked(X, PREDICT_CHUNK)]
        return np.concatenate(out) if out else np.zeros(0)

    def power_squared_many(self, X):
        """P(x)^2 before clamping, one value per row of X."""
        X = self.kernel.as_rows(X)
        diag = self.kernel.diagonal(X)
        if self.size == 0:
            return diag
        c, lower = self.gram_factor
        out = []
        for start, chunk in zip(range(0, X.shape[0], PREDICT_CHUNK), chunked(X, PREDICT_CHUNK)):
            k = self.kernel.gram(self.dataset.inputs, chunk)
            v = linalg.solve_triangular(c, k, lower=lower, trans=0 if lower else 1)
            out.append(diag[start:start + chunk.shape[0]] - np.einsum("ij,ij->j", v, v))
        return np.concatenate(out)

    def power_many(self, X):
        sq = self.power_squared_many(X)
        worst = float(sq.min()) if sq.size else 0.0
        if worst < -POWER_RADICAND_TOLERANCE:
            raise NumericalError("power function radicand {:.3e} is negative".format(worst))
        return np.sqrt(np.maximum(sq, 0.0))

    def power(self, x):
        x = self.kernel.as_vector(x)
        return float(self.power_many(x.reshape(1, -1))[0])

    def error_envelope(self, x):
        return self.beta * self.power(x)

    def error_envelope_many(self, X):
        return self.beta * self.power_many(X)

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "rkhs_bound": self.rkhs_bound,
            "noise_bound": self.dataset.noise_bound,
            "inputs": self.dataset.inputs.tolist(),
            "targets": self.dataset.targets.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta,
            "beta_clamped": self.beta_clamped,
        }

    @classmethod
    def from_dict(cls, d):
        """Restores a model by refitting the stored data.

        The stored alpha must agree with the refit.
        """
        kernel = KernelSpec.from_dict(d["kernel"])
        inputs = np.asarray(d["inputs"], dtype=float).reshape(-1, kernel.input_dim)
        dataset = Dataset(inputs, d["targets"], d["noise_bound"])
        model = fit(kernel, dataset, d["rkhs_bound"])
        stored = np.asarray(d.get("alpha", model.alpha.tolist()), dtype=float)
        if stored.shape != model.alpha.shape or (
                stored.size and np.max(np.abs(stored - model.alpha)) > ALPHA_RESTORE_TOLERANCE):
            raise NumericalError("stored coefficients disagree with the refit model")
        return model


def empty_model(kernel, rkhs_bound, noise_bound=0.0):
    """Model of the no-data convention: mu = 0, P(x) = sqrt(k(x, x))."""
    dataset = Dataset.empty(kernel.input_dim, noise_bound)
    beta = math.sqrt(rkhs_bound ** 2 + 1)
    return KrrModel(
        dataset=dataset,
        kernel=kernel,
        alpha=np.zeros(0),
        gram_factor=None,
        beta=beta,
        rkhs_bound=float(rkhs_bound),
        beta_radicand=beta ** 2)


def regularizer(dataset):
    return dataset.size * dataset.noise_bound ** 2


def _min_pivot(M):
    """Smallest diagonal entry of the LDL^T factor of M, a non-PD diagnostic."""
    _, d, _ = linalg.ldl(M)
    return float(np.min(np.diag(d)))


def fit(kernel, data, B):
    if data.input_dim != kernel.input_dim:
        raise InputError("dataset has dimension {}, kernel expects {}".format(
            data.input_dim, kernel.input_dim))
    if not B > 0:
        raise InputError("RKHS bound must be positive, got {!r}".format(B))

    if data.size == 0:
        logger.warning("fitting an empty dataset, the model predicts 0 everywhere")
        model = empty_model(kernel, B, data.noise_bound)
        signals.model_fitted.send(model)
        return model

    if not data.noise_bound > 0:
        raise InputError("noise_bound must be positive to fit {} samples".format(data.size))

    K = kernel.gram(data.inputs)
    M = K + regularizer(data) * np.eye(data.size)
    try:
        factor = linalg.cho_factor(M, lower=True)
    except linalg.LinAlgError:
        pivot = _min_pivot(M)
        raise FittingError(
            "regularized Gram matrix is not positive definite (smallest pivot {:.3e})".format(pivot),
            min_pivot=pivot)

    z = data.targets
    alpha = linalg.cho_solve(factor, z)
    residual = float(np.max(np.abs(M @ alpha - z)))

    radicand = B ** 2 - float(z @ alpha) + 1
    clamped = radicand < 0
    if clamped:
        logger.warning(
            "beta radicand %.6g is negative; the RKHS bound B=%g is inconsistent "
            "with the data, clamping beta to 0", radicand, B)
        signals.beta_clamped.send(None, radicand=radicand, rkhs_bound=B)
    beta = math.sqrt(max(radicand, 0.0))

    model = KrrModel(
        dataset=data,
        kernel=kernel,
        alpha=alpha,
        gram_factor=factor,
        beta=beta,
        rkhs_bound=float(B),
        beta_radicand=radicand,
        beta_clamped=clamped,
        fit_residual=residual)
    logger.info("fitted KRR model on %d samples, beta=%.6g, residual=%.3e",
                data.size, beta, residual)
    signals.model_fitted.send(model)
    return model


def predict(model, x):
    return model.predict(x)


def power(model, x):
    return model.power(x)


def beta(model):
    return model.beta


def error_envelope(model, x):
    return model.error_envelope(x)
