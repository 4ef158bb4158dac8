"""Experiment configuration.

One JSON document describes an experiment: plant, kernel, reference, poles,
Lyapunov Q, acquisition and simulation settings. Every field is validated
before anything runs; errors name the offending field by its dotted path.

`PAPER_CONFIG` is the published experiment. It leaves the domain and the
safe set open; the domain here is the plotted range x1 in [-12, 12],
x2 in [-6, 6] and the safe set pulls it 10% inward.
"""
import copy
import math
from dataclasses import dataclass

import numpy as np
import simplejson

from .errors import ConfigError
from .core import kernels, plant, synthesis, acquisition

PAPER_CONFIG = {
    "plant": {
        "order": 2,
        "step_seconds": 0.2,
        "nonlinearity": "paper_sim",
        "v_bar": 0.01,
        "noise": "uniform",
        "domain": {"lower": [-12.0, -6.0], "upper": [12.0, 6.0]},
        "safe_set": {"lower": [-10.8, -5.4], "upper": [10.8, 5.4]},
        "input_set": {"lower": -20.0, "upper": 20.0},
    },
    "kernel": {"sigma_f": 0.5, "length_scale": 5.0},
    "rkhs_bound": 0.3,
    "reference": {"driving": "paper_sine", "initial_state": None},
    "poles": {"controller": [0.8, 0.7], "observer": [0.01, 0.02]},
    "lyapunov_q": 1.0,
    "acquisition": {
        "episodes": 100,
        "target_size": 200,
        "episode_steps": 40,
        "reset_radius": 1.0,
        "seed": 2024,
        "policy": "tracking",
        "strict_paper_pairing": False,
    },
    "simulation": {
        "steps": 200,
        "x0": None,
        "x_hat0": None,
        "seeds": list(range(20)),
    },
    "grid_per_dim": 101,
}


class _Reader:
    """Reads typed fields out of nested dicts, raising ConfigError with the field path."""

    def __init__(self, data, path=""):
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "must be an object")
        self.data = data
        self.path = path

    def field(self, name):
        return "{}.{}".format(self.path, name) if self.path else name

    def section(self, name):
        if name not in self.data:
            raise ConfigError(self.field(name), "missing")
        return _Reader(self.data[name], self.field(name))

    def raw(self, name, default=KeyError):
        if name not in self.data:
            if default is KeyError:
                raise ConfigError(self.field(name), "missing")
            return default
        return self.data[name]

    def number(self, name, minimum=None, strict=False, default=KeyError):
        value = self.raw(name, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(self.field(name), "must be a finite number, got {!r}".format(value))
        if minimum is not None and (value <= minimum if strict else value < minimum):
            raise ConfigError(self.field(name), "must be {} {}".format(">" if strict else ">=", minimum))
        return float(value)

    def integer(self, name, minimum=None, default=KeyError):
        value = self.raw(name, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(self.field(name), "must be an integer, got {!r}".format(value))
        if minimum is not None and value < minimum:
            raise ConfigError(self.field(name), "must be >= {}".format(minimum))
        return value

    def string(self, name, default=KeyError):
        value = self.raw(name, default)
        if not isinstance(value, str):
            raise ConfigError(self.field(name), "must be a string, got {!r}".format(value))
        return value

    def boolean(self, name, default=KeyError):
        value = self.raw(name, default)
        if not isinstance(value, bool):
            raise ConfigError(self.field(name), "must be true or false, got {!r}".format(value))
        return value

    def vector(self, name, length, allow_null=False):
        value = self.raw(name, None if allow_null else KeyError)
        if value is None and allow_null:
            return None
        if (not isinstance(value, list) or len(value) != length or
                not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
                        for v in value)):
            raise ConfigError(self.field(name), "must be a list of {} finite numbers".format(length))
        return [float(v) for v in value]

    def box(self, name, dim):
        r = self.section(name)
        lower = r.vector("lower", dim)
        upper = r.vector("upper", dim)
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise ConfigError(self.field(name), "lower bound exceeds upper bound")
        return plant.Box(lower, upper)

    def poles(self, name, count):
        value = self.raw(name)
        if not isinstance(value, list) or len(value) != count:
            raise ConfigError(self.field(name), "must list {} poles".format(count))
        poles = []
        for i, p in enumerate(value):
            if isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p):
                p = complex(p[0], p[1])
            elif isinstance(p, (int, float)) and not isinstance(p, bool):
                p = complex(p)
            else:
                raise ConfigError("{}[{}]".format(self.field(name), i),
                                  "must be a number or a [re, im] pair")
            poles.append(p)
        arr = np.array(poles)
        if not np.allclose(np.sort_complex(arr), np.sort_complex(arr.conj())):
            raise ConfigError(self.field(name), "must be closed under complex conjugation")
        return tuple(poles)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    data: dict
    order: int
    step: float
    nonlinearity: str
    v_bar: float
    noise: str
    domain: plant.Box
    safe_set: plant.Box
    input_set: plant.Interval
    sigma_f: float
    length_scale: float
    rkhs_bound: float
    driving: str
    initial_state: list
    controller_poles: tuple
    observer_poles: tuple
    q_matrix: np.ndarray
    episodes: int
    target_size: int
    episode_steps: int
    reset_radius: float
    acquisition_seed: int
    policy: str
    strict_pairing: bool
    steps: int
    x0: list
    x_hat0: list
    seeds: list
    grid_per_dim: int

    @classmethod
    def from_dict(cls, data):
        r = _Reader(data)
        p = r.section("plant")
        order = p.integer("order", minimum=1)
        step = p.number("step_seconds", minimum=0, strict=True)
        nonlinearity = p.string("nonlinearity")
        v_bar = p.number("v_bar", minimum=0)
        noise = p.string("noise", default="uniform")
        plant.noise_lookup(noise)
        domain = p.box("domain", order)
        safe_set = p.box("safe_set", order)
        if not safe_set.issubset(domain):
            raise ConfigError("plant.safe_set", "must lie inside plant.domain")
        i = p.section("input_set")
        lo, hi = i.number("lower"), i.number("upper")
        if lo > hi:
            raise ConfigError("plant.input_set", "lower bound exceeds upper bound")
        if nonlinearity.partition(":")[0] not in plant.get_registered_nonlinearities():
            raise ConfigError("plant.nonlinearity", "unknown nonlinearity {!r}".format(nonlinearity))
        if nonlinearity == "paper_sim" and order < 2:
            raise ConfigError("plant.nonlinearity", "paper_sim needs order >= 2")

        k = r.section("kernel")
        sigma_f = k.number("sigma_f", minimum=0, strict=True)
        length_scale = k.number("length_scale", minimum=0, strict=True)
        rkhs_bound = r.number("rkhs_bound", minimum=0, strict=True)

        ref = r.section("reference")
        driving = ref.string("driving")
        try:
            plant.driver_lookup(driving)
        except ConfigError as e:
            raise ConfigError("reference.driving", e.message)
        initial_state = ref.vector("initial_state", order, allow_null=True)

        poles = r.section("poles")
        controller_poles = poles.poles("controller", order)
        observer_poles = poles.poles("observer", order)

        q_matrix = _q_matrix(r.raw("lyapunov_q", 1.0), 2 * order)

        a = r.section("acquisition")
        episodes = a.integer("episodes", minimum=0)
        target_size = a.raw("target_size", None)
        if target_size is not None:
            target_size = a.integer("target_size", minimum=0)
        episode_steps = a.integer("episode_steps", minimum=1)
        reset_radius = a.raw("reset_radius", None)
        if reset_radius is not None:
            reset_radius = a.number("reset_radius", minimum=0)
        acquisition_seed = a.integer("seed", minimum=0)
        policy = a.string("policy", default="tracking")
        if policy not in ("tracking", "random"):
            raise ConfigError("acquisition.policy", "must be 'tracking' or 'random'")
        strict_pairing = a.boolean("strict_paper_pairing", default=False)

        s = r.section("simulation")
        steps = s.integer("steps", minimum=1)
        x0 = s.vector("x0", order, allow_null=True)
        x_hat0 = s.vector("x_hat0", order, allow_null=True)
        seeds = s.raw("seeds")
        if (not isinstance(seeds, list) or not seeds or
                not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in seeds)):
            raise ConfigError("simulation.seeds", "must be a non-empty list of non-negative integers")

        grid_per_dim = r.raw("grid_per_dim", None)
        if grid_per_dim is not None:
            grid_per_dim = r.integer("grid_per_dim", minimum=2)

        return cls(
            data=copy.deepcopy(data), order=order, step=step, nonlinearity=nonlinearity,
            v_bar=v_bar, noise=noise, domain=domain, safe_set=safe_set, input_set=plant.Interval(lo, hi),
            sigma_f=sigma_f, length_scale=length_scale, rkhs_bound=rkhs_bound,
            driving=driving, initial_state=initial_state,
            controller_poles=controller_poles, observer_poles=observer_poles,
            q_matrix=q_matrix, episodes=episodes, target_size=target_size,
            episode_steps=episode_steps, reset_radius=reset_radius,
            acquisition_seed=acquisition_seed, policy=policy, strict_pairing=strict_pairing,
            steps=steps, x0=x0, x_hat0=x_hat0, seeds=list(seeds), grid_per_dim=grid_per_dim)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def to_json(self):
        return simplejson.dumps(self.data, sort_keys=True, indent=2)

    def replace(self, **overrides):
        """New config with dotted-path overrides, e.g. replace(**{"simulation.steps": 1})."""
        data = copy.deepcopy(self.data)
        for path, value in overrides.items():
            node = data
            keys = path.split(".")
            for key in keys[:-1]:
                node = node.setdefault(key, {})
            node[keys[-1]] = value
        return ExperimentConfig.from_dict(data)

    def build_kernel(self):
        return kernels.KernelSpec(self.sigma_f, self.length_scale, self.order)

    def lipschitz(self):
        return kernels.f_lipschitz(self.build_kernel(), self.rkhs_bound)

    def noise_bound(self):
        return acquisition.noise_bound(self.order, self.step, self.v_bar,
                                       self.lipschitz().f_lipschitz)

    def build_plant(self):
        f = plant.registry_lookup(self.nonlinearity, kernel=self.build_kernel(), domain=self.domain,
                                  rkhs_norm=self.rkhs_bound)
        return plant.PlantConfig(
            order=self.order, step=self.step, f=f, v_bar=self.v_bar,
            domain=self.domain, safe_set=self.safe_set, input_set=self.input_set)

    def noise_source(self, seed):
        return plant.noise_lookup(self.noise)(seed, self.v_bar)

    def build_reference(self):
        r = plant.driver_lookup(self.driving)
        s0 = r.initial_state(self.order) if self.initial_state is None else self.initial_state
        return plant.ReferenceSpec(r=r, initial_state=s0, step=self.step)

    def build_gains(self):
        return synthesis.synthesize(self.order, self.step, self.controller_poles, self.observer_poles)

    def initial_states(self):
        """(x0, x_hat0); unset entries start at the reference s(0)."""
        s0 = self.build_reference().initial_state
        x0 = s0 if self.x0 is None else np.array(self.x0)
        x_hat0 = s0 if self.x_hat0 is None else np.array(self.x_hat0)
        return np.array(x0, dtype=float), np.array(x_hat0, dtype=float)

    def exploration_policy(self):
        if self.policy == "random":
            return acquisition.RandomInputPolicy(self.input_set)
        return acquisition.TrackingPolicy(self.build_gains(), self.build_reference(),
                                          reset_radius=self.reset_radius)


def _q_matrix(value, dim):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if not value > 0:
            raise ConfigError("lyapunov_q", "scale must be positive")
        return float(value) * np.eye(dim)
    try:
        Q = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("lyapunov_q", "must be a positive scale or a {0}x{0} matrix".format(dim))
    if Q.shape != (dim, dim):
        raise ConfigError("lyapunov_q", "must be a positive scale or a {0}x{0} matrix".format(dim))
    if not np.allclose(Q, Q.T) or np.any(np.linalg.eigvalsh((Q + Q.T) / 2) <= 0):
        raise ConfigError("lyapunov_q", "must be symmetric positive definite")
    return Q


def load(path):
    try:
        with open(path) as f:
            data = simplejson.load(f)
    except (IOError, OSError) as e:
        raise ConfigError("<file>", "cannot read {}: {}".format(path, e))
    except simplejson.JSONDecodeError as e:
        raise ConfigError("<file>", "invalid JSON in {}: {}".format(path, e))
    return ExperimentConfig.from_dict(data)


def paper_config():
    return ExperimentConfig.from_dict(copy.deepcopy(PAPER_CONFIG))
