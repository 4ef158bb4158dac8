"""Stages of an experiment: collect, train, analyze, simulate.

Each stage is a plain function of an ExperimentConfig and the artifacts of
the stages before it. `reproduce` chains all of them and writes the bundle.
"""
import os
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import audits, exports
from .app import app
from .errors import ConfigError, ControllerFault, InfeasibleError, LearnTrackError, StageError
from .core import acquisition, krr, plant, synthesis
from .core.controller import run_closed_loop
from .core.plant import reference_trajectory

logger = logging.getLogger(__name__)

VARIANTS = ("without_krr", "with_krr", "exact")

# surface.csv is a full tensor grid, so it is only written for small orders
SURFACE_MAX_ORDER = 3

# audit events are ordered by stage; within the closed-loop stage by (variant, seed)
_STAGE_ORDER = ["acquisition", "krr", "synthesis", "controller"]


def setting(name, default=None):
    return app.config.get(name, default)


def collect_stage(cfg):
    plant_cfg = cfg.build_plant()
    w_bar = cfg.noise_bound()
    return acquisition.acquire(
        plant_cfg, cfg.exploration_policy(), cfg.acquisition_seed, cfg.episodes, w_bar,
        target_size=cfg.target_size, max_steps=cfg.episode_steps, strict=cfg.strict_pairing,
        noise_factory=plant.noise_lookup(cfg.noise))


def collect_metadata(cfg, result):
    metadata = result.metadata(cfg.build_plant(), cfg.lipschitz().f_lipschitz, cfg.acquisition_seed)
    metadata["noise"] = cfg.noise
    metadata["reset_radius"] = cfg.reset_radius
    return metadata


def train_stage(cfg, dataset):
    if dataset.input_dim != cfg.order:
        raise ConfigError("plant.order", "dataset has dimension {}, config has order {}".format(
            dataset.input_dim, cfg.order))
    return krr.fit(cfg.build_kernel(), dataset, cfg.rkhs_bound)


def analyze_stage(cfg, model, grid_per_dim=None):
    """Gains, power-function supremum and the certificate as one report."""
    grid_per_dim = grid_per_dim or cfg.grid_per_dim or setting("GRID_PER_DIM", 101)
    gains = cfg.build_gains()
    lipschitz = cfg.lipschitz()
    P_bar = synthesis.power_sup(model, cfg.domain, grid_per_dim)
    cert = synthesis.certificate(
        gains, cfg.q_matrix, lipschitz.f_lipschitz, model.certificate_beta, cfg.v_bar, P_bar,
        max_kronecker_dim=setting("LYAPUNOV_KRONECKER_MAX_DIM", synthesis.KRONECKER_MAX_DIM))
    report = {
        "gains": gains.to_dict(),
        "certificate": cert.to_dict(),
        "power_ceiling": synthesis.power_ceiling(model),
        "kernel_lipschitz": lipschitz.kappa_lipschitz,
        "f_lipschitz": lipschitz.f_lipschitz,
        "rkhs_bound": cfg.rkhs_bound,
        "w_bar": cfg.noise_bound(),
        "model": {
            "size": model.size,
            "beta": model.beta,
            "beta_clamped": model.beta_clamped,
            "certificate_beta": model.certificate_beta,
            "fit_residual": model.fit_residual,
        },
        "grid_per_dim": grid_per_dim,
    }
    return gains, cert, report


def bound_certificate(cfg, model, grid_per_dim=None):
    """Certificate used to judge traces of `model`; None when there is none to apply."""
    if model is None:
        return None
    try:
        _, cert, _ = analyze_stage(cfg, model, grid_per_dim)
    except InfeasibleError as e:
        logger.warning("no tracking bound for the traces: %s", e)
        return None
    return cert


def variant_models(model, variants):
    handles = {"without_krr": "none", "with_krr": model, "exact": "exact"}
    unknown = [v for v in variants if v not in handles]
    if unknown:
        raise ConfigError("variants", "unknown variants {}".format(unknown))
    if "with_krr" in variants and model is None:
        raise ConfigError("variants", "with_krr needs a trained model")
    return [(v, handles[v]) for v in variants]


def simulate_stage(cfg, model, variants=VARIANTS, seeds=None, steps=None, workers=None):
    """Closed-loop traces for every (variant, seed), in that order.

    Runs concurrently on a thread pool; the result order does not depend on
    scheduling.
    """
    seeds = cfg.seeds if seeds is None else seeds
    steps = steps or cfg.steps
    workers = workers or setting("SWEEP_WORKERS", 1)
    plant_cfg = cfg.build_plant()
    reference = cfg.build_reference()
    gains = cfg.build_gains()
    x0, x_hat0 = cfg.initial_states()
    tasks = [(variant, handle, seed)
             for variant, handle in variant_models(model, variants) for seed in seeds]

    def run(task):
        variant, handle, seed = task
        return run_closed_loop(plant_cfg, reference, gains, handle, x0, x_hat0, steps, seed,
                               noise=cfg.noise_source(seed), variant=variant)

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            traces = list(executor.map(run, tasks))
    else:
        traces = [run(t) for t in tasks]
    for trace in traces:
        logger.info("%s seed %d: %d steps%s", trace.variant, trace.seed, len(trace),
                    ", fault: " + trace.fault if trace.fault else "")
    return traces


def summarize(traces, cert, window=None):
    """One row per trace plus the aggregate comparison across variants."""
    window = window or setting("STEADY_STATE_WINDOW", 50)
    bound = cert.tracking_bound if cert is not None and cert.feasible else None
    rows = [trace.summary(bound=bound, window=window) for trace in traces]
    for row in rows:
        row.setdefault("bound", None)
        row.setdefault("k_bar", None)
        row.setdefault("violations_total", None)

    def median_of(variant, key):
        values = [r[key] for r in rows if r["variant"] == variant and r[key] is not None]
        return float(np.median(values)) if values else None

    variants = sorted({r["variant"] for r in rows}, key=lambda v: VARIANTS.index(v)
                      if v in VARIANTS else len(VARIANTS))
    aggregate = {
        "steady_state_window": window,
        "variants": {v: {"steady_e_median": median_of(v, "steady_e_median"),
                         "steady_e_hat_median": median_of(v, "steady_e_hat_median")}
                     for v in variants},
    }
    without = median_of("without_krr", "steady_e_median")
    with_krr = median_of("with_krr", "steady_e_median")
    aggregate["improvement_ratio"] = (
        without / with_krr if without is not None and with_krr else None)

    if bound is None:
        aggregate["bound_verdict"] = "unavailable"
    else:
        learned = [r for r in rows if r["variant"] == "with_krr"]
        contained = all(r["k_bar"] is not None for r in learned)
        aggregate["bound_verdict"] = "contained" if contained else "violated"
    aggregate["bound"] = bound
    aggregate["faults"] = sum(1 for t in traces if t.fault)
    return rows, aggregate


def ordered_events(events):
    def key(event):
        prefix = event["action"].split(".")[0]
        rank = _STAGE_ORDER.index(prefix) if prefix in _STAGE_ORDER else len(_STAGE_ORDER)
        if prefix == "controller":
            return (rank, event.get("variant", ""), event.get("seed", 0))
        return (rank, "", 0)
    return sorted(events, key=key)


def _stage(name, func, *args, **kwargs):
    logger.info("stage %s", name)
    try:
        return func(*args, **kwargs)
    except (LearnTrackError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        raise StageError(name, e)


def reproduce(cfg, out_dir, seeds=None, steps=None, grid_per_dim=None, workers=None):
    """Runs collect, train, analyze and simulate and writes every artifact to `out_dir`.

    Returns the aggregate summary.
    """
    os.makedirs(out_dir, exist_ok=True)
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)

    with audits.recording() as events:
        result = _stage("collect", collect_stage, cfg)
        model = _stage("train", train_stage, cfg, result.dataset)
        gains, cert, report = _stage("analyze", analyze_stage, cfg, model, grid_per_dim)
        traces = _stage("simulate", simulate_stage, cfg, model, VARIANTS, seeds, steps, workers)

    rows, aggregate = summarize(traces, cert)

    exports.write_json(os.path.join(out_dir, "config.json"), cfg.to_dict())
    exports.write_dataset(os.path.join(out_dir, "dataset.csv"), result.dataset,
                          collect_metadata(cfg, result))
    exports.write_tablib(os.path.join(out_dir, "episodes.csv"), exports.export_episodes(result))
    exports.write_json(os.path.join(out_dir, "model.json"), model.to_dict())
    exports.write_json(os.path.join(out_dir, "certificate.json"), report)
    if cfg.order <= SURFACE_MAX_ORDER:
        exports.write_tablib(os.path.join(out_dir, "surface.csv"), exports.export_surface(
            cfg.build_plant().f, model, cfg.domain, setting("SURFACE_GRID_PER_DIM", 30)))
    else:
        logger.info("order %d: no surface.csv", cfg.order)
    for trace in traces:
        exports.write_tablib(os.path.join(trace_dir, exports.trace_filename(trace)),
                             exports.export_trace(trace))
    if aggregate["bound"] is not None:
        s = reference_trajectory(cfg.build_reference(), (steps or cfg.steps) - 1)
        exports.write_tablib(os.path.join(out_dir, "band.csv"),
                             exports.export_band(s, aggregate["bound"]))
    exports.write_tablib(os.path.join(out_dir, "summary.csv"), exports.export_summary(rows))
    exports.write_json(os.path.join(out_dir, "summary.json"), aggregate)
    exports.write_json(os.path.join(out_dir, "events.json"), ordered_events(events))

    logger.info("improvement ratio %s, bound verdict %s",
                aggregate["improvement_ratio"], aggregate["bound_verdict"])
    if aggregate["faults"]:
        raise StageError("simulate", ControllerFault(
            "{} closed-loop runs aborted, partial traces written".format(aggregate["faults"])))
    return aggregate
