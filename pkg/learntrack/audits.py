"""Audit trail of a run.

Receivers for the domain signals. While a `recording()` block is active,
every event is appended to its list; the reproduction bundle writes that
list as events.json. Events carry no timestamps so that bundles stay
byte-reproducible.
"""
import contextlib
import logging
import threading

from .core import signals

logger = logging.getLogger(__name__)

_lock = threading.Lock()
_recorders = []


@contextlib.contextmanager
def recording():
    events = []
    with _lock:
        _recorders.append(events)
    try:
        yield events
    finally:
        with _lock:
            _recorders.remove(events)


def record_audit(action, **data):
    with _lock:
        for events in _recorders:
            events.append(dict(action=action, **data))


@signals.episode_finished.connect
def on_episode_finished(run, episode, pairs):
    record_audit("acquisition.episode-finished", episode=episode,
                 exit_index=run.exit_index, pairs=pairs)


@signals.input_clamped.connect
def on_input_clamped(sender, k, u, clipped):
    record_audit("acquisition.input-clamped", k=k, u=u, clipped=clipped)


@signals.safe_set_violation.connect
def on_safe_set_violation(sender, k, state):
    record_audit("acquisition.safe-set-violation", k=k, state=state)


@signals.dataset_collected.connect
def on_dataset_collected(dataset, episodes):
    record_audit("acquisition.dataset-collected", size=dataset.size, episodes=episodes,
                 noise_bound=dataset.noise_bound)


@signals.model_fitted.connect
def on_model_fitted(model):
    record_audit("krr.model-fitted", size=model.size, beta=model.beta,
                 beta_clamped=model.beta_clamped, fit_residual=model.fit_residual)


@signals.beta_clamped.connect
def on_beta_clamped(sender, radicand, rkhs_bound):
    record_audit("krr.beta-clamped", radicand=radicand, rkhs_bound=rkhs_bound)


@signals.pole_outside_unit_disk.connect
def on_pole_outside_unit_disk(sender, poles):
    record_audit("synthesis.pole-outside-unit-disk", poles=[str(p) for p in poles])


@signals.certificate_computed.connect
def on_certificate_computed(cert):
    logger.info("certificate: xi0=%.6g chi=%.6g feasible=%s", cert.xi0, cert.chi, cert.feasible)
    record_audit("synthesis.certificate-computed", xi0=cert.xi0, feasible=cert.feasible,
                 tracking_bound=cert.tracking_bound)


@signals.simulation_finished.connect
def on_simulation_finished(trace):
    record_audit("controller.simulation-finished", variant=trace.variant, seed=trace.seed,
                 steps=len(trace))


@signals.simulation_aborted.connect
def on_simulation_aborted(trace, error):
    record_audit("controller.simulation-aborted", variant=trace.variant, seed=trace.seed,
                 steps=len(trace), error=str(error))
