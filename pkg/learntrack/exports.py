"""CSV and JSON files written and read by the command line.

CSV goes through tablib, JSON through simplejson with sorted keys, so the
same inputs always produce the same bytes.

Columns of the CSV files and what they plot:

    dataset.csv   x_tilde_1 .. x_tilde_n, z          training pairs (scatter over the state plane)
    episodes.csv  episode, k, t, x_1 .. x_n, u, y    exploration runs
    <trace>.csv   k, t, x_*, x_hat_*, s_*, u, y,     phase portrait (x_* against s_*),
                  e_norm, e_hat_norm, residual,      error norms over k
                  noise
    band.csv      k, s_*, lower_*, upper_*           reference with the certified tracking band
    surface.csv   x_1 .. x_n, f, mu, envelope        learned f against the true one with its envelope
"""
import os
import logging

import numpy as np
import simplejson
import tablib

from .errors import InputError
from .core.krr import Dataset

logger = logging.getLogger(__name__)


def _columns(prefix, n):
    return ["{}_{}".format(prefix, i + 1) for i in range(n)]


def dumps(data):
    return simplejson.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path, data):
    with open(path, "w") as f:
        f.write(dumps(data))
    logger.info("wrote %s", path)


def read_json(path):
    with open(path) as f:
        return simplejson.load(f)


def write_tablib(path, data):
    with open(path, "w", newline="") as f:
        f.write(data.export("csv"))
    logger.info("wrote %s (%d rows)", path, data.height)


def sidecar_path(path):
    return os.path.splitext(path)[0] + ".json"


def export_dataset(dataset):
    headers = _columns("x_tilde", dataset.input_dim) + ["z"]
    data = tablib.Dataset(headers=headers, title="Dataset")
    for x, z in zip(dataset.inputs, dataset.targets):
        data.append([float(v) for v in x] + [float(z)])
    return data


def write_dataset(path, dataset, metadata):
    """Writes the dataset CSV and its JSON sidecar next to it."""
    write_tablib(path, export_dataset(dataset))
    write_json(sidecar_path(path), metadata)


def read_dataset(path):
    """(Dataset, metadata) from a CSV written by `write_dataset`."""
    meta_path = sidecar_path(path)
    if not os.path.exists(meta_path):
        raise InputError("dataset sidecar {} is missing".format(meta_path))
    metadata = read_json(meta_path)
    n = int(metadata["n"])

    with open(path, newline="") as f:
        text = f.read()
    headers = _columns("x_tilde", n) + ["z"]
    if not text.strip():
        raise InputError("dataset file {} is empty".format(path))
    data = tablib.Dataset().load(text, format="csv")
    if list(data.headers) != headers:
        raise InputError("dataset {} has columns {}, expected {}".format(path, data.headers, headers))
    rows = np.array([[float(v) for v in row] for row in data], dtype=float).reshape(-1, n + 1)
    return Dataset(rows[:, :n], rows[:, n], float(metadata["w_bar"])), metadata


def export_episodes(result):
    if not result.runs:
        n = result.dataset.input_dim
    else:
        n = result.runs[0].states.shape[1]
    headers = ["episode", "k", "t"] + _columns("x", n) + ["u", "y"]
    data = tablib.Dataset(headers=headers, title="Episodes")
    for i, run in enumerate(result.runs):
        for k in range(run.exit_index + 1):
            data.append([i, k, k * run.step] + [float(v) for v in run.states[k]] +
                        [float(run.inputs[k]), float(run.outputs[k])])
    return data


def export_trace(trace):
    n = trace.records[0].x.shape[0] if trace.records else 0
    headers = (["k", "t"] + _columns("x", n) + _columns("x_hat", n) + _columns("s", n) +
               ["u", "y", "e_norm", "e_hat_norm", "residual", "noise"])
    data = tablib.Dataset(headers=headers, title="{} seed {}".format(trace.variant, trace.seed))
    for r in trace.records:
        data.append(
            [r.k, r.t] + [float(v) for v in r.x] + [float(v) for v in r.x_hat] +
            [float(v) for v in r.s] + [r.u, r.y, r.e_norm, r.e_hat_norm, r.residual, r.noise])
    return data


def export_band(reference_states, bound):
    """Reference trajectory and the box of half-width `bound` around it."""
    states = np.asarray(reference_states, dtype=float)
    n = states.shape[1]
    headers = ["k"] + _columns("s", n) + _columns("lower", n) + _columns("upper", n)
    data = tablib.Dataset(headers=headers, title="Band")
    for k, s in enumerate(states):
        data.append([k] + s.tolist() + (s - bound).tolist() + (s + bound).tolist())
    return data


def export_surface(f, model, domain, points_per_dim):
    """True f, the prediction and its error envelope on a tensor grid of `domain`."""
    X = domain.grid(points_per_dim)
    headers = _columns("x", domain.dim) + ["f", "mu", "envelope"]
    data = tablib.Dataset(headers=headers, title="Surface")
    for x, fx, mu, env in zip(X, f.many(X), model.predict_many(X), model.error_envelope_many(X)):
        data.append([float(v) for v in x] + [float(fx), float(mu), float(env)])
    return data


def export_summary(rows):
    """Rows are dicts sharing one key set; columns are sorted."""
    headers = sorted(rows[0]) if rows else []
    data = tablib.Dataset(headers=headers, title="Summary")
    for row in rows:
        data.append(["" if row[h] is None else row[h] for h in headers])
    return data


def trace_filename(trace):
    return "{}_seed{}.csv".format(trace.variant, trace.seed)
