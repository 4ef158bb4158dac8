"""Command-line interface, registered on `app.cli`.

    collect, train, analyze, simulate, reproduce-paper, show-config

Exit codes: 0 ok, 2 configuration error, 3 runtime fault, 4 error
dynamics not Schur. Without --config the embedded published configuration is used.
"""
import os
import logging
import functools

import click

from . import experiment, exports, pipeline
from .app import app
from .core.krr import KrrModel
from .errors import ConfigError, LearnTrackError

logger = logging.getLogger(__name__)


def handle_errors(func):
    """Reports LearnTrackError on stderr and exits with its exit code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except LearnTrackError as e:
            logger.error("%s failed: %s", func.__name__, e)
            click.echo("error: {}".format(e), err=True)
            click.get_current_context().exit(e.exit_code)
    return wrapper


def load_config(path):
    if path is None:
        return experiment.paper_config()
    if not os.path.exists(path):
        raise ConfigError("<file>", "no such file: {}".format(path))
    return experiment.load(path)


def load_model(path, cfg):
    if not os.path.exists(path):
        raise ConfigError("--model", "no such file: {}".format(path))
    model = KrrModel.from_dict(exports.read_json(path))
    if model.kernel.input_dim != cfg.order:
        raise ConfigError("--model", "model has dimension {}, config has order {}".format(
            model.kernel.input_dim, cfg.order))
    return model


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                             default=None, help="Experiment JSON (default: published configuration).")


@app.cli.command("collect")
@config_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Dataset CSV to write.")
@click.option("--seed", type=int, default=None, help="Acquisition seed.")
@click.option("--strict-paper-pairing", is_flag=True, default=False,
              help="Pair x_tilde(k) with x_tilde_n(k) - u(k) as literally listed.")
@handle_errors
def collect(config_path, out, seed, strict_paper_pairing):
    "Collects a training dataset from noisy output measurements."
    cfg = load_config(config_path)
    if seed is not None:
        cfg = cfg.replace(**{"acquisition.seed": seed})
    if strict_paper_pairing:
        cfg = cfg.replace(**{"acquisition.strict_paper_pairing": True})

    result = pipeline.collect_stage(cfg)
    exports.write_dataset(out, result.dataset, pipeline.collect_metadata(cfg, result))
    click.echo("N={} w_bar={!r} episodes={}".format(
        result.dataset.size, result.dataset.noise_bound, result.episodes))


@app.cli.command("train")
@config_option
@click.option("--dataset", "dataset_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model JSON to write.")
@handle_errors
def train(config_path, dataset_path, out):
    "Fits the kernel ridge regression model to a dataset."
    cfg = load_config(config_path)
    if not os.path.exists(dataset_path):
        raise ConfigError("--dataset", "no such file: {}".format(dataset_path))
    dataset, _ = exports.read_dataset(dataset_path)
    model = pipeline.train_stage(cfg, dataset)
    exports.write_json(out, model.to_dict())
    click.echo("N={} beta={!r} beta_clamped={} fit_residual={!r}".format(
        model.size, model.beta, model.beta_clamped, model.fit_residual))


@app.cli.command("analyze")
@config_option
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Also write the report here.")
@click.option("--grid-per-dim", type=int, default=None)
@handle_errors
def analyze(config_path, model_path, out, grid_per_dim):
    "Synthesizes the gains and prints the stability certificate."
    cfg = load_config(config_path)
    model = load_model(model_path, cfg)
    if grid_per_dim is not None and grid_per_dim < 2:
        raise ConfigError("--grid-per-dim", "must be at least 2")
    _, _, report = pipeline.analyze_stage(cfg, model, grid_per_dim)
    if out:
        exports.write_json(out, report)
    click.echo(exports.dumps(report), nl=False)


@app.cli.command("simulate")
@config_option
@click.option("--model", "model_path", default=None, type=click.Path(dir_okay=False),
              help="Trained model; adds the with_krr variant.")
@click.option("--no-learning", is_flag=True, default=False, help="Add the variant with mu = 0.")
@click.option("--exact", is_flag=True, default=False, help="Add the variant with mu = f.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Directory for traces.")
@click.option("--seed", "seeds", type=int, multiple=True, help="Noise seed; repeatable.")
@click.option("--steps", type=int, default=None)
@handle_errors
def simulate(config_path, model_path, no_learning, exact, out, seeds, steps):
    "Runs the closed loop for each requested variant and seed."
    cfg = load_config(config_path)
    if steps is not None and steps < 1:
        raise ConfigError("--steps", "must be at least 1")
    variants = []
    if no_learning:
        variants.append("without_krr")
    if model_path:
        variants.append("with_krr")
    if exact:
        variants.append("exact")
    if not variants:
        raise ConfigError("variants", "give --model, --no-learning or --exact")
    model = load_model(model_path, cfg) if model_path else None

    traces = pipeline.simulate_stage(cfg, model, variants, list(seeds) or None, steps)
    rows, aggregate = pipeline.summarize(traces, pipeline.bound_certificate(cfg, model))

    os.makedirs(out, exist_ok=True)
    for trace in traces:
        exports.write_tablib(os.path.join(out, exports.trace_filename(trace)),
                             exports.export_trace(trace))
    exports.write_tablib(os.path.join(out, "summary.csv"), exports.export_summary(rows))
    exports.write_json(os.path.join(out, "summary.json"), aggregate)
    click.echo(exports.dumps(aggregate), nl=False)
    if aggregate["faults"]:
        click.echo("error: {} runs aborted, partial traces written".format(aggregate["faults"]),
                   err=True)
        click.get_current_context().exit(3)


@app.cli.command("reproduce-paper")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Bundle directory.")
@click.option("--seed", "seeds", type=int, multiple=True, help="Simulation seed; repeatable.")
@click.option("--steps", type=int, default=None)
@click.option("--grid-per-dim", type=int, default=None)
@handle_errors
def reproduce_paper(out, seeds, steps, grid_per_dim):
    "Runs collect, train, analyze and simulate on the published configuration."
    cfg = experiment.paper_config()
    aggregate = pipeline.reproduce(cfg, out, seeds=list(seeds) or None, steps=steps,
                                   grid_per_dim=grid_per_dim)
    click.echo(exports.dumps(aggregate), nl=False)


@app.cli.command("show-config")
@handle_errors
def show_config():
    "Prints the published configuration as JSON."
    click.echo(experiment.paper_config().to_json())
