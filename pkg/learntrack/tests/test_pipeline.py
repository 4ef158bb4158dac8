import os
import math

import numpy as np
import pytest
import simplejson

from learntrack import audits, exports, pipeline
from learntrack.errors import StageError
from learntrack.experiment import paper_config


@pytest.fixture(scope="module")
def paper_run():
    cfg = paper_config()
    result = pipeline.collect_stage(cfg)
    model = pipeline.train_stage(cfg, result.dataset)
    return cfg, result, model


def small_config(**overrides):
    values = {"acquisition.episodes": 20, "acquisition.target_size": 60,
              "simulation.seeds": [0, 1, 2], "simulation.steps": 40, "grid_per_dim": 11}
    values.update(overrides)
    return paper_config().replace(**values)


def test_collect_paper(paper_run):
    cfg, result, _ = paper_run
    assert result.dataset.size == 200
    assert result.dataset.noise_bound == pytest.approx(0.10743, abs=2e-5)
    assert 0 <= result.safety_violations <= result.episodes


def test_train_paper(paper_run):
    _, _, model = paper_run
    assert model.size == 200
    assert model.beta <= math.sqrt(0.3 ** 2 + 1)
    assert model.fit_residual < 1e-8


def test_analyze_paper(paper_run):
    cfg, _, model = paper_run
    gains, cert, report = pipeline.analyze_stage(cfg, model, grid_per_dim=51)
    assert cert.residual <= 1e-9
    assert cert.xi0 == pytest.approx(-0.6626, abs=1e-3)
    assert not cert.feasible
    assert cert.tracking_bound is None
    assert report["power_ceiling"] == 0.5
    assert 0 < cert.P_bar <= report["power_ceiling"]
    assert report["certificate"]["feasible"] == cert.feasible
    assert report["f_lipschitz"] == pytest.approx(0.0739, abs=5e-5)
    assert report["model"]["certificate_beta"] == model.certificate_beta
    simplejson.dumps(report)


def test_simulate_ordering_does_not_depend_on_workers(paper_run):
    cfg, _, model = paper_run
    serial = pipeline.simulate_stage(cfg, model, seeds=[0, 1, 2], steps=50, workers=1)
    pooled = pipeline.simulate_stage(cfg, model, seeds=[0, 1, 2], steps=50, workers=4)
    assert [(t.variant, t.seed) for t in pooled] == [(t.variant, t.seed) for t in serial]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.error_states(), b.error_states())


def test_learning_reduces_tracking_error(paper_run):
    cfg, _, model = paper_run
    traces = pipeline.simulate_stage(cfg, model)
    rows, aggregate = pipeline.summarize(traces, None, window=50)
    assert len(rows) == 60
    variants = aggregate["variants"]
    assert variants["exact"]["steady_e_median"] < variants["with_krr"]["steady_e_median"]
    assert variants["with_krr"]["steady_e_median"] < variants["without_krr"]["steady_e_median"]
    assert aggregate["improvement_ratio"] >= 3
    assert aggregate["bound_verdict"] == "unavailable"


def test_variant_models():
    with pytest.raises(Exception):
        pipeline.variant_models(None, ["with_krr"])
    assert pipeline.variant_models(None, ["exact"]) == [("exact", "exact")]


def test_ordered_events():
    events = [
        {"action": "controller.simulation-finished", "variant": "with_krr", "seed": 1},
        {"action": "krr.model-fitted"},
        {"action": "controller.simulation-finished", "variant": "exact", "seed": 0},
        {"action": "acquisition.episode-finished", "episode": 0},
        {"action": "acquisition.episode-finished", "episode": 1},
    ]
    assert [e["action"].split(".")[0] for e in pipeline.ordered_events(events)] == [
        "acquisition", "acquisition", "krr", "controller", "controller"]
    assert pipeline.ordered_events(events)[3]["variant"] == "exact"
    assert pipeline.ordered_events(events)[0]["episode"] == 0


def test_audit_recording():
    cfg = small_config()
    with audits.recording() as events:
        result = pipeline.collect_stage(cfg)
        pipeline.train_stage(cfg, result.dataset)
    actions = [e["action"] for e in events]
    assert actions.count("acquisition.episode-finished") == result.episodes
    assert "acquisition.dataset-collected" in actions
    assert actions[-1] == "krr.model-fitted"


def read_bundle(path):
    files = {}
    for root, _, names in os.walk(path):
        for name in names:
            full = os.path.join(root, name)
            with open(full, "rb") as f:
                files[os.path.relpath(full, path)] = f.read()
    return files


def test_reproduce_bundle(tmp_path):
    cfg = small_config()
    one = pipeline.reproduce(cfg, str(tmp_path / "one"), workers=3)
    two = pipeline.reproduce(cfg, str(tmp_path / "two"), workers=1)
    assert one == two

    first, second = read_bundle(str(tmp_path / "one")), read_bundle(str(tmp_path / "two"))
    assert first == second
    for name in ["config.json", "dataset.csv", "dataset.json", "episodes.csv", "model.json",
                 "certificate.json", "surface.csv", "summary.csv", "summary.json",
                 "events.json", os.path.join("traces", "with_krr_seed0.csv")]:
        assert name in first
    assert len([n for n in first if n.startswith("traces")]) == 9

    dataset, metadata = exports.read_dataset(str(tmp_path / "one" / "dataset.csv"))
    assert dataset.size == 60
    assert 0 < metadata["episodes"] <= 20
    assert metadata["size"] == 60

    surface = first["surface.csv"].decode().splitlines()
    assert surface[0].split(",") == ["x_1", "x_2", "f", "mu", "envelope"]
    assert len(surface) == 1 + 30 * 30
    assert all(float(line.split(",")[-1]) >= 0 for line in surface[1:])

    summary = exports.read_json(str(tmp_path / "one" / "summary.json"))
    assert summary["bound_verdict"] in ("unavailable", "contained")
    assert ("band.csv" in first) == (summary["bound"] is not None)


def test_reproduce_paper(tmp_path):
    summary = pipeline.reproduce(paper_config(), str(tmp_path))
    assert summary["improvement_ratio"] >= 3
    assert summary["bound_verdict"] != "violated"
    assert summary["faults"] == 0


def test_stage_failure_names_stage(tmp_path):
    cfg = small_config(**{"poles.observer": [1.5, 0.2]})
    with pytest.raises(StageError) as excinfo:
        pipeline.reproduce(cfg, str(tmp_path))
    assert excinfo.value.stage == "analyze"
    assert excinfo.value.exit_code == 4


def test_bound_certificate(paper_run):
    cfg, _, model = paper_run
    assert pipeline.bound_certificate(cfg, None) is None
    cert = pipeline.bound_certificate(cfg, model, grid_per_dim=11)
    assert not cert.feasible


def test_bound_certificate_not_schur(paper_run, caplog):
    cfg, _, model = paper_run
    unstable = cfg.replace(**{"poles.controller": [1.2, 0.7]})
    assert pipeline.bound_certificate(unstable, model, grid_per_dim=11) is None
    assert "no tracking bound" in caplog.text


def test_bound_reaches_the_summary():
    cfg = small_config(**{"plant.nonlinearity": "rkhs_sample:11", "rkhs_bound": 0.03,
                          "acquisition.target_size": 200, "acquisition.episodes": 50})
    model = pipeline.train_stage(cfg, pipeline.collect_stage(cfg).dataset)
    cert = pipeline.bound_certificate(cfg, model)
    assert cert.feasible
    rows, aggregate = pipeline.summarize(pipeline.simulate_stage(cfg, model), cert)
    assert aggregate["bound"] == cert.tracking_bound
    assert aggregate["bound_verdict"] in ("contained", "violated")
    assert all(r["bound"] == cert.tracking_bound for r in rows)


def test_collect_truncated_gaussian_noise():
    cfg = small_config(**{"plant.noise": "truncated_gaussian"})
    result = pipeline.collect_stage(cfg)
    f = cfg.build_plant().f
    residual = np.abs(result.dataset.targets - f.many(result.dataset.inputs))
    assert residual.max() <= cfg.noise_bound()
    assert pipeline.collect_metadata(cfg, result)["noise"] == "truncated_gaussian"
    uniform = pipeline.collect_stage(small_config())
    assert not np.array_equal(uniform.dataset.targets, result.dataset.targets)
