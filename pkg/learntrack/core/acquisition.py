"""Training data from output measurements only.

Auxiliary states rebuild the full state by divided differences of y,

    x_tilde_1(k) = y(k),  x_tilde_{i+1}(k) = (x_tilde_i(k+1) - x_tilde_i(k)) / T

and every episode step k = 0 .. k*-n yields the pair (x_tilde(k), z(k)) with

    z(k) = x_tilde_n(k+1) - u(k)

so that z(k) - f(x(k)) is pure measurement noise. Pairing with
x_tilde_n(k) instead (strict=True) reproduces the literal data-collection
listing, whose targets are off by one step.

The policy picks each episode's start in the safe set S: uniformly by
default, or next to the reference for `TrackingPolicy` with a reset radius.
Episodes run until the state leaves S or `max_steps` is reached.
"""
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from . import signals
from .controller import ControllerState, NoLearning, control, observer_step
from .krr import Dataset
from .plant import UniformNoise, measure, plant_step, reference_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AcquisitionRun:
    outputs: np.ndarray
    inputs: np.ndarray
    exit_index: int
    step: float
    states: np.ndarray = None
    left_domain: bool = False

    def __post_init__(self):
        outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        inputs = np.asarray(self.inputs, dtype=float).reshape(-1)
        if outputs.shape != inputs.shape or outputs.shape[0] != self.exit_index + 1:
            raise InputError("outputs and inputs must both have exit_index + 1 entries")
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "inputs", inputs)


@dataclass(frozen=True, eq=False)
class AuxiliaryStates:
    x_tilde: np.ndarray


def auxiliary_states(run, n):
    """Divided-difference table, rows x_tilde(k) for k = 0 .. k*-n+1.

    Runs shorter than n + 1 samples give an empty table.
    """
    y = run.outputs
    if y.shape[0] < n + 1:
        return AuxiliaryStates(np.zeros((0, n)))
    levels = [y]
    for _ in range(n - 1):
        levels.append(np.diff(levels[-1]) / run.step)
    rows = y.shape[0] - n + 1
    return AuxiliaryStates(np.column_stack([level[:rows] for level in levels]))


def build_dataset(run, n, w_bar, strict=False):
    k_star = run.exit_index
    if k_star < n:
        return Dataset.empty(n, w_bar)
    x_tilde = auxiliary_states(run, n).x_tilde
    count = k_star - n + 1
    u = run.inputs[:count]
    if strict:
        z = x_tilde[:count, n - 1] - u
    else:
        z = x_tilde[1:count + 1, n - 1] - u
    return Dataset(x_tilde[:count], z, w_bar)


def geometric_factor(n, T, direct=False):
    """sqrt(sum_{i=1..n} (2/T)^(2(i-1))), closed form unless `direct`."""
    q = 2.0 / T
    if direct:
        return math.sqrt(sum(q ** (2 * (i - 1)) for i in range(1, n + 1)))
    if math.isclose(q, 1.0):
        return math.sqrt(n)
    return math.sqrt((1 - q ** (2 * n)) / (1 - q ** 2))


def noise_bound(n, T, v_bar, L_f):
    """Bound w_bar on |z - f(x_tilde)| inherited from |v| <= v_bar."""
    if not T > 0:
        raise InputError("step must be positive, got {!r}".format(T))
    if not (v_bar >= 0 and L_f >= 0):
        raise InputError("v_bar and L_f must be non-negative")
    return ((2.0 / T) ** (n - 1) + L_f * geometric_factor(n, T)) * v_bar


def state_error_radius(n, T, v_bar):
    """Bound on |x - x_tilde|."""
    return geometric_factor(n, T) * v_bar


class Policy:
    """Exploration control law. Called once per step with the fresh measurement."""

    def reset(self, rng, safe_set):
        """Prepares a new episode and returns its initial state."""
        return safe_set.sample(rng)

    def __call__(self, k, y):
        raise NotImplementedError()


class RandomInputPolicy(Policy):
    """u uniform over the input set."""

    def __init__(self, input_set):
        self.input_set = input_set
        self.rng = None

    def reset(self, rng, safe_set):
        self.rng = rng
        return safe_set.sample(rng)

    def __call__(self, k, y):
        return float(self.rng.uniform(self.input_set.lower, self.input_set.upper))


class TrackingPolicy(Policy):
    """The tracking controller with its observer and mu = 0.

    Each episode picks a random starting index of the reference in
    [0, phase_range) so that episodes cover different parts of it. With
    `reset_radius` None the episode starts uniformly in the safe set;
    otherwise it starts at s(offset) plus a uniform offset of at most
    `reset_radius` per component, clipped to the safe set, so the samples
    follow the region the tracked reference visits.
    """

    def __init__(self, gains, reference, phase_range=63, reset_radius=None):
        if reset_radius is not None and not reset_radius >= 0:
            raise InputError("reset radius must be non-negative, got {!r}".format(reset_radius))
        self.gains = gains
        self.reference = reference
        self.phase_range = phase_range
        self.reset_radius = reset_radius
        self.offset = 0
        self.s = None
        self.ctrl = None

    def reset(self, rng, safe_set):
        self.offset = int(rng.integers(0, self.phase_range)) if self.phase_range else 0
        s = self.reference.initial_state
        for k in range(self.offset):
            s = reference_step(self.reference, s, k)
        self.s = s
        self.ctrl = ControllerState(x_hat=s, gains=self.gains, model=NoLearning())
        if self.reset_radius is None:
            return safe_set.sample(rng)
        jitter = rng.uniform(-self.reset_radius, self.reset_radius, s.shape[0])
        return np.clip(s + jitter, safe_set.lower, safe_set.upper)

    def __call__(self, k, y):
        kk = self.offset + k
        s_next = reference_step(self.reference, self.s, kk)
        u = control(self.ctrl, self.s, self.reference.r(kk))
        observer_step(self.ctrl, self.s, s_next, y)
        self.s = s_next
        return u


def run_episode(cfg, policy, rng, noise, max_steps):
    x = np.asarray(policy.reset(rng, cfg.safe_set), dtype=float)
    outputs, inputs, states = [], [], []
    left_domain = False
    k = 0
    while True:
        states.append(x)
        y = measure(cfg, x, noise)
        u = policy(k, y)
        if not cfg.input_set.contains(u):
            clipped = cfg.input_set.clip(u)
            logger.warning("exploration input %.6g outside the input set, clamped to %.6g", u, clipped)
            signals.input_clamped.send(None, k=k, u=u, clipped=clipped)
            u = clipped
        outputs.append(y)
        inputs.append(u)
        if not cfg.safe_set.contains(x):
            if not cfg.domain.contains(x):
                left_domain = True
                logger.warning("state %s left the domain before the safe-set exit was detected", x)
                signals.safe_set_violation.send(None, k=k, state=x.tolist())
            break
        if k == max_steps:
            break
        x = plant_step(cfg, x, u)
        k += 1
    return AcquisitionRun(
        outputs=outputs, inputs=inputs, exit_index=k, step=cfg.step,
        states=np.array(states), left_domain=left_domain)


@dataclass
class AcquisitionResult:
    dataset: Dataset
    runs: list = field(default_factory=list)
    boundaries: list = field(default_factory=list)
    episode_seeds: list = field(default_factory=list)
    safety_violations: int = 0
    strict: bool = False

    @property
    def episodes(self):
        return len(self.runs)

    def metadata(self, cfg, L_f, seed):
        return {
            "n": cfg.order,
            "T": cfg.step,
            "v_bar": cfg.v_bar,
            "w_bar": self.dataset.noise_bound,
            "L_f": L_f,
            "seed": seed,
            "episode_seeds": self.episode_seeds,
            "episode_boundaries": self.boundaries,
            "episodes": self.episodes,
            "size": self.dataset.size,
            "safety_violations": self.safety_violations,
            "strict_paper_pairing": self.strict,
        }


def acquire(cfg, policy, seed, max_episodes, w_bar, target_size=None, max_steps=40,
            strict=False, noise_factory=UniformNoise):
    """Runs episodes until `max_episodes` or `target_size` samples.

    Episode i draws its reset state and noise from the i-th child of
    SeedSequence(seed); results do not depend on anything else.
    """
    n = cfg.order
    dataset = Dataset.empty(n, w_bar)
    result = AcquisitionResult(dataset=dataset, strict=strict)
    children = np.random.SeedSequence(seed).spawn(max_episodes) if max_episodes > 0 else []

    for i, child in enumerate(children):
        if target_size is not None and result.dataset.size >= target_size:
            break
        rng_seed, noise_seed = (int(s) for s in child.generate_state(2))
        rng = np.random.default_rng(rng_seed)
        noise = noise_factory(noise_seed, cfg.v_bar)
        run = run_episode(cfg, policy, rng, noise, max_steps)
        data = build_dataset(run, n, w_bar, strict=strict)

        result.runs.append(run)
        result.episode_seeds.append([rng_seed, noise_seed])
        result.safety_violations += int(run.left_domain)
        result.dataset = result.dataset.concat(data)
        result.boundaries.append(result.dataset.size)
        logger.debug("episode %d: k*=%d, %d pairs", i, run.exit_index, data.size)
        signals.episode_finished.send(run, episode=i, pairs=data.size)

    if target_size is not None and result.dataset.size > target_size:
        result.dataset = result.dataset.head(target_size)
        result.boundaries = [min(b, target_size) for b in result.boundaries]

    logger.info("collected %d samples in %d episodes, w_bar=%.6g",
                result.dataset.size, result.episodes, w_bar)
    signals.dataset_collected.send(result.dataset, episodes=result.episodes)
    return result


def collect(cfg, policy, seed, max_episodes, w_bar, target_size=None, max_steps=40, strict=False):
    return acquire(cfg, policy, seed, max_episodes, w_bar, target_size=target_size,
                   max_steps=max_steps, strict=strict).dataset
