"""Discrete-time integrator chain, reference generator and measurement noise.

    x_i(k+1) = x_i(k) + T x_{i+1}(k)      i < n
    x_n(k+1) = f(x(k)) + u(k)
    y(k)     = x_1(k) + v(k),  |v(k)| <= v_bar

The reference s obeys the same chain with its top component driven by r(k).

Nonlinearities f and driving functions r are looked up by name from
registries. Parameterized names carry their parameter after a colon, e.g.
"rkhs_sample:7" or "constant:1.5".
"""
import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import truncnorm

from ..errors import InputError, ConfigError, PropagationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box {x : lower <= x <= upper}."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InputError("box bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise InputError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return self.lower.shape[0]

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def issubset(self, other):
        return bool(np.all(self.lower >= other.lower) and np.all(self.upper <= other.upper))

    def sample(self, rng):
        return rng.uniform(self.lower, self.upper)

    def shrink(self, fraction):
        """Box pulled inward by `fraction` of the half-width on every side."""
        center = (self.lower + self.upper) / 2
        half = (self.upper - self.lower) / 2 * (1 - fraction)
        return Box(center - half, center + half)

    def inflate(self, radius):
        return Box(self.lower - radius, self.upper + radius)

    def grid(self, points_per_dim):
        """Tensor grid with `points_per_dim` points per axis, one row per point."""
        axes = [np.linspace(lo, hi, points_per_dim) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise InputError("interval lower bound exceeds upper bound")

    def contains(self, value):
        return self.lower <= value <= self.upper

    def clip(self, value):
        return min(max(value, self.lower), self.upper)


class Nonlinearity:
    """Deterministic map f: X -> R, the unknown top-level dynamics."""
    name = None

    def __call__(self, x):
        raise NotImplementedError()

    def many(self, X):
        return np.array([self(x) for x in np.asarray(X, dtype=float)])


class ZeroNonlinearity(Nonlinearity):
    name = "zero"

    def __call__(self, x):
        return 0.0

    def many(self, X):
        return np.zeros(np.asarray(X).shape[0])


class PaperNonlinearity(Nonlinearity):
    """f(x) = 0.5 (sin(0.2 x_1) - 1) + 1 / (1 + exp(x_2))."""
    name = "paper_sim"

    def __call__(self, x):
        return 0.5 * (math.sin(0.2 * x[0]) - 1) + float(expit(-x[1]))

    def many(self, X):
        X = np.asarray(X, dtype=float)
        return 0.5 * (np.sin(0.2 * X[:, 0]) - 1) + expit(-X[:, 1])


class RkhsSample(Nonlinearity):
    """Finite kernel expansion f(x) = sum_j a_j k(c_j, x).

    Its RKHS norm is known exactly, sqrt(a^T K_C a), which makes it the
    ground truth for checking the KRR error envelope.
    """

    def __init__(self, kernel, centers, coefficients, name="rkhs_sample"):
        self.kernel = kernel
        self.centers = kernel.as_rows(centers)
        self.coefficients = np.asarray(coefficients, dtype=float).reshape(-1)
        if self.coefficients.shape[0] != self.centers.shape[0]:
            raise InputError("one coefficient per center expected")
        self.name = name

    @property
    def rkhs_norm(self):
        a = self.coefficients
        return math.sqrt(max(float(a @ self.kernel.gram(self.centers) @ a), 0.0))

    def __call__(self, x):
        k = self.kernel.gram(self.centers, np.asarray(x, dtype=float).reshape(1, -1))[:, 0]
        return float(k @ self.coefficients)

    def many(self, X):
        return self.kernel.gram(X, self.centers) @ self.coefficients


def rkhs_sample(seed, kernel, domain, rkhs_norm=None, num_centers=10):
    """Random kernel expansion with centers uniform in `domain`.

    When `rkhs_norm` is given the coefficients are rescaled to that exact norm.
    """
    rng = np.random.default_rng(seed)
    centers = np.stack([domain.sample(rng) for _ in range(num_centers)])
    coefficients = rng.standard_normal(num_centers)
    f = RkhsSample(kernel, centers, coefficients, name="rkhs_sample:{}".format(seed))
    if rkhs_norm is not None:
        norm = f.rkhs_norm
        if norm > 0:
            f.coefficients = coefficients * (rkhs_norm / norm)
    return f


_nonlinearities = {}

def register_nonlinearity(name):
    """Decorator to register a factory of nonlinearities under `name`.

    The factory is called with the parameter after the colon (or None) and
    the keyword context given to `registry_lookup`.
    """
    def decorator(factory):
        _nonlinearities[name] = factory
        return factory
    return decorator


@register_nonlinearity("zero")
def _zero(param, **context):
    return ZeroNonlinearity()


@register_nonlinearity("paper_sim")
def _paper(param, **context):
    return PaperNonlinearity()


@register_nonlinearity("rkhs_sample")
def _rkhs_sample(param, kernel=None, domain=None, rkhs_norm=None, **context):
    if kernel is None or domain is None:
        raise ConfigError("nonlinearity", "rkhs_sample needs a kernel and a domain")
    try:
        seed = int(param) if param else 0
    except ValueError:
        raise ConfigError("nonlinearity", "rkhs_sample seed must be an integer, got {!r}".format(param))
    return rkhs_sample(seed, kernel, domain, rkhs_norm=rkhs_norm)


def registry_lookup(name, **context):
    base, _, param = name.partition(":")
    if base not in _nonlinearities:
        raise ConfigError("nonlinearity", "unknown nonlinearity {!r}".format(name))
    return _nonlinearities[base](param or None, **context)


def get_registered_nonlinearities():
    return sorted(_nonlinearities)


@dataclass(frozen=True, eq=False)
class PlantConfig:
    order: int
    step: float
    f: Nonlinearity
    v_bar: float
    domain: Box
    safe_set: Box
    input_set: Interval

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise InputError("order must be a positive integer, got {!r}".format(self.order))
        if not self.step > 0:
            raise InputError("step must be positive, got {!r}".format(self.step))
        if not self.v_bar >= 0:
            raise InputError("v_bar must be non-negative, got {!r}".format(self.v_bar))
        if self.domain.dim != self.order or self.safe_set.dim != self.order:
            raise InputError("domain and safe set must have dimension {}".format(self.order))
        if not self.safe_set.issubset(self.domain):
            raise InputError("safe set is not contained in the domain")


class NoiseSource:
    """Bounded measurement noise. Stateful; one trajectory per source."""

    def __init__(self, seed, bound):
        if not bound >= 0:
            raise InputError("noise bound must be non-negative, got {!r}".format(bound))
        self.seed = seed
        self.bound = float(bound)
        self.rng = np.random.default_rng(seed)

    def sample(self):
        raise NotImplementedError()


class UniformNoise(NoiseSource):
    """i.i.d. uniform on [-bound, bound]."""

    def sample(self):
        return float(self.rng.uniform(-self.bound, self.bound))


class TruncatedGaussianNoise(NoiseSource):
    """Zero-mean Gaussian with standard deviation `scale`, truncated to [-bound, bound]."""

    def __init__(self, seed, bound, scale=None):
        NoiseSource.__init__(self, seed, bound)
        self.scale = scale or self.bound / 2

    def sample(self):
        if self.bound == 0:
            return 0.0
        c = self.bound / self.scale
        return float(truncnorm.rvs(-c, c, scale=self.scale, random_state=self.rng))


_noises = {
    "uniform": UniformNoise,
    "truncated_gaussian": TruncatedGaussianNoise,
}

def noise_lookup(name):
    """NoiseSource class registered under `name`."""
    if name not in _noises:
        raise ConfigError("plant.noise", "unknown noise {!r}, expected one of {}".format(
            name, sorted(_noises)))
    return _noises[name]


def _as_state(x, order):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (order,):
        raise InputError("expected a state of dimension {}, got shape {}".format(order, x.shape))
    return x


def chain_step(x, top, step):
    """Integrator chain update with the top component replaced by `top`."""
    x_next = np.empty_like(x)
    x_next[:-1] = x[:-1] + step * x[1:]
    x_next[-1] = top
    return x_next


def plant_step(cfg, x, u):
    x = _as_state(x, cfg.order)
    if not (np.all(np.isfinite(x)) and math.isfinite(u)):
        raise PropagationError("non-finite plant state {} or input {!r}".format(x, u))
    if not cfg.domain.contains(x):
        logger.warning("plant state %s is outside the domain", x)
    top = cfg.f(x) + u
    if not math.isfinite(top):
        raise PropagationError("nonlinearity returned a non-finite value at {}".format(x))
    return chain_step(x, top, cfg.step)


def measure(cfg, x, noise):
    return float(x[0]) + noise.sample()


def simulate_open_loop(cfg, x0, inputs, noise):
    """Applies `inputs` from `x0`. Returns (states, outputs), states one row longer."""
    x = _as_state(x0, cfg.order)
    states = [x]
    outputs = []
    for u in inputs:
        outputs.append(measure(cfg, x, noise))
        x = plant_step(cfg, x, float(u))
        states.append(x)
    return np.array(states), np.array(outputs)


class DrivingFunction:
    """Top-level input r(k) of the reference chain."""
    name = None

    def __call__(self, k):
        raise NotImplementedError()

    def initial_state(self, order):
        return np.zeros(order)


class PaperSine(DrivingFunction):
    """r(k) = 50 (sin(0.1k + 0.2) - sin(0.1k + 0.1)), s(0) = (0, ..., 0, 50 sin(0.1))."""
    name = "paper_sine"

    def __call__(self, k):
        return 50 * (math.sin(0.1 * k + 0.2) - math.sin(0.1 * k + 0.1))

    def initial_state(self, order):
        s0 = np.zeros(order)
        s0[-1] = 50 * math.sin(0.1)
        return s0


class ConstantDrive(DrivingFunction):

    def __init__(self, value=0.0):
        self.value = float(value)
        self.name = "zero" if self.value == 0 else "constant:{!r}".format(self.value)

    def __call__(self, k):
        return self.value


_drivers = {
    "paper_sine": lambda param: PaperSine(),
    "zero": lambda param: ConstantDrive(0.0),
    "constant": lambda param: ConstantDrive(float(param or 0.0)),
}

def driver_lookup(name):
    base, _, param = name.partition(":")
    if base not in _drivers:
        raise ConfigError("reference.driving", "unknown driving function {!r}".format(name))
    try:
        return _drivers[base](param or None)
    except ValueError:
        raise ConfigError("reference.driving", "bad parameter in {!r}".format(name))


@dataclass(frozen=True, eq=False)
class ReferenceSpec:
    r: DrivingFunction
    initial_state: np.ndarray
    step: float

    def __post_init__(self):
        s0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float))
        if s0.ndim != 1 or not np.all(np.isfinite(s0)):
            raise InputError("reference initial state must be a finite vector")
        if not self.step > 0:
            raise InputError("step must be positive, got {!r}".format(self.step))
        object.__setattr__(self, "initial_state", s0)

    @property
    def order(self):
        return self.initial_state.shape[0]


def reference_step(spec, s, k):
    s = _as_state(s, spec.order)
    return chain_step(s, spec.r(k), spec.step)


def reference_trajectory(spec, steps, start=0):
    """States s(start) ... s(start + steps), advancing from s(0)."""
    s = spec.initial_state
    for k in range(start):
        s = reference_step(spec, s, k)
    states = [s]
    for k in range(start, start + steps):
        s = reference_step(spec, s, k)
        states.append(s)
    return np.array(states)
