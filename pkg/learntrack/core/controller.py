"""Learning-based tracking controller with a state observer, and the closed loop.

    u(k)        = -mu(x_hat(k)) + r(k) + phi^T (x_hat(k) - s(k))
    x_hat(k+1)  = (A + b phi^T)(x_hat(k) - s(k)) + s(k+1) + theta (x_hat_1(k) - y(k))

One closed-loop step runs, in this order: measure, control, plant step,
reference advance, observer step. Any other order changes the results.
"""
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, ControllerFault, LearnTrackError
from . import signals
from .plant import measure, plant_step, reference_step, UniformNoise

logger = logging.getLogger(__name__)


class NoLearning:
    """mu = 0, the controller without a learned model."""
    name = "none"

    def predict(self, x):
        return 0.0


class ExactModel:
    """mu = f, the ground truth. Only for the exact-cancellation baseline."""
    name = "exact"

    def __init__(self, f):
        self.f = f

    def predict(self, x):
        return self.f(x)


def resolve_model(handle, f=None):
    """Predictor for "none", "exact" (needs the true f) or a fitted model."""
    if handle is None or handle == "none":
        return NoLearning()
    if handle == "exact":
        if f is None:
            raise InputError("the exact model needs the plant nonlinearity")
        return ExactModel(f)
    if hasattr(handle, "predict"):
        return handle
    raise InputError("unknown model handle {!r}".format(handle))


@dataclass
class ControllerState:
    x_hat: np.ndarray
    gains: object
    model: object = field(default_factory=NoLearning)

    def __post_init__(self):
        self.x_hat = np.array(self.x_hat, dtype=float)
        if self.x_hat.shape != (self.gains.order,):
            raise InputError("observer state must have dimension {}".format(self.gains.order))


def control(ctrl, s, r_k):
    mu = ctrl.model.predict(ctrl.x_hat)
    if not math.isfinite(mu):
        raise ControllerFault("model prediction is not finite at {}".format(ctrl.x_hat))
    u = -mu + r_k + float(ctrl.gains.phi @ (ctrl.x_hat - s))
    if not math.isfinite(u):
        raise ControllerFault("control input is not finite")
    return u


def observer_step(ctrl, s_k, s_next, y_k):
    g = ctrl.gains
    x_hat = g.closed_loop @ (ctrl.x_hat - s_k) + s_next + g.theta * (ctrl.x_hat[0] - y_k)
    if not np.all(np.isfinite(x_hat)):
        raise ControllerFault("observer state is not finite")
    ctrl.x_hat = x_hat
    return x_hat


@dataclass
class StepRecord:
    k: int
    t: float
    x: np.ndarray
    x_hat: np.ndarray
    s: np.ndarray
    u: float
    y: float
    residual: float
    noise: float

    @property
    def e(self):
        return self.x - self.s

    @property
    def e_hat(self):
        return self.x_hat - self.x

    @property
    def e_norm(self):
        return float(np.linalg.norm(self.e))

    @property
    def e_hat_norm(self):
        return float(np.linalg.norm(self.e_hat))


@dataclass
class SimulationTrace:
    variant: str
    seed: int
    records: list = field(default_factory=list)
    fault: str = None

    def __len__(self):
        return len(self.records)

    @property
    def e_norms(self):
        return np.array([r.e_norm for r in self.records])

    @property
    def e_hat_norms(self):
        return np.array([r.e_hat_norm for r in self.records])

    @property
    def residuals(self):
        return np.array([r.residual for r in self.records])

    @property
    def noises(self):
        return np.array([r.noise for r in self.records])

    def error_states(self):
        """Rows (e, e_hat) per step."""
        return np.array([np.concatenate([r.e, r.e_hat]) for r in self.records])

    def summary(self, bound=None, window=50):
        e = self.e_norms
        e_hat = self.e_hat_norms
        tail = slice(max(len(self) - window, 0), None)
        d = {
            "variant": self.variant,
            "seed": self.seed,
            "steps": len(self),
            "fault": self.fault,
            "steady_e_median": float(np.median(e[tail])) if len(self) else None,
            "steady_e_hat_median": float(np.median(e_hat[tail])) if len(self) else None,
        }
        if bound is not None:
            worst = np.maximum(e, e_hat)
            k_bar = observed_entry_index(worst, bound)
            d["bound"] = bound
            d["k_bar"] = k_bar
            d["violations_total"] = int(np.sum(worst > bound))
        return d


def observed_entry_index(norms, bound):
    """Smallest k with norms[j] <= bound for every j >= k; None if the last one exceeds it."""
    outside = np.nonzero(np.asarray(norms) > bound)[0]
    if outside.size == 0:
        return 0
    k = int(outside[-1]) + 1
    return k if k < len(norms) else None


def run_closed_loop(cfg, ref, gains, model, x0, x_hat0, steps, seed, noise=None, variant=None):
    if steps < 1:
        raise InputError("steps must be at least 1, got {!r}".format(steps))
    predictor = resolve_model(model, cfg.f)
    noise = noise or UniformNoise(seed, cfg.v_bar)
    x = np.array(x0, dtype=float)
    s = np.array(ref.initial_state, dtype=float)
    ctrl = ControllerState(x_hat=x_hat0, gains=gains, model=predictor)
    trace = SimulationTrace(variant=variant or getattr(predictor, "name", "krr"), seed=seed)

    try:
        for k in range(steps):
            y = measure(cfg, x, noise)
            x_hat = ctrl.x_hat.copy()
            u = control(ctrl, s, ref.r(k))
            residual = cfg.f(x) - predictor.predict(x_hat)
            trace.records.append(StepRecord(
                k=k, t=k * cfg.step, x=x, x_hat=x_hat, s=s, u=u, y=y,
                residual=residual, noise=y - x[0]))
            x = plant_step(cfg, x, u)
            s_next = reference_step(ref, s, k)
            observer_step(ctrl, s, s_next, y)
            s = s_next
    except LearnTrackError as e:
        trace.fault = str(e)
        logger.error("closed loop aborted at step %d: %s", len(trace), e)
        signals.simulation_aborted.send(trace, error=e)
        return trace

    signals.simulation_finished.send(trace)
    return trace


def trace_to_error_states(trace):
    """Rows e_tilde(k) = (e(k), e_hat(k)) of a closed-loop trace."""
    return trace.error_states()


def run_error_dynamics(gains, residuals, noises, e_tilde0, steps):
    """Iterates e_tilde(k+1) = A_tilde e_tilde + b_tilde d(k) - theta_tilde v(k).

    Returns steps + 1 rows, e_tilde(0) first. The noise enters with a minus
    sign because the observer innovation is theta (c^T e_hat - v).
    """
    residuals = np.asarray(residuals, dtype=float)
    noises = np.asarray(noises, dtype=float)
    if residuals.shape[0] < steps or noises.shape[0] < steps:
        raise InputError("residual and noise sequences must cover {} steps".format(steps))
    e = np.array(e_tilde0, dtype=float)
    if e.shape != (2 * gains.order,):
        raise InputError("e_tilde0 must have dimension {}".format(2 * gains.order))
    out = [e]
    for k in range(steps):
        e = gains.A_tilde @ e + gains.b_tilde * residuals[k] - gains.theta_tilde * noises[k]
        out.append(e)
    return np.array(out)
