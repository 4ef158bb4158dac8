import os
import copy
import math

import numpy as np
import pytest
import simplejson

from learntrack.errors import ConfigError
from learntrack.experiment import PAPER_CONFIG, ExperimentConfig, load, paper_config

PAPER_JSON = os.path.join(os.path.dirname(__file__), "..", "..", "config", "paper.json")


def broken(path, value):
    data = copy.deepcopy(PAPER_CONFIG)
    node = data
    keys = path.split(".")
    for key in keys[:-1]:
        node = node[key]
    if value is KeyError:
        del node[keys[-1]]
    else:
        node[keys[-1]] = value
    return data


def test_paper_config():
    cfg = paper_config()
    assert cfg.order == 2
    assert cfg.step == 0.2
    assert cfg.sigma_f == 0.5 and cfg.length_scale == 5.0
    assert cfg.rkhs_bound == 0.3
    assert cfg.target_size == 200
    assert cfg.seeds == list(range(20))
    np.testing.assert_array_equal(cfg.q_matrix, np.eye(4))
    assert cfg.noise_bound() == pytest.approx(0.10743, abs=2e-5)


def test_shipped_paper_json_matches_embedded():
    with open(PAPER_JSON) as f:
        assert simplejson.load(f) == PAPER_CONFIG
    assert load(PAPER_JSON).to_dict() == PAPER_CONFIG


def test_round_trip():
    cfg = paper_config()
    again = ExperimentConfig.from_dict(simplejson.loads(cfg.to_json()))
    assert again.to_dict() == cfg.to_dict()
    assert again.to_json() == cfg.to_json()


def test_builders():
    cfg = paper_config()
    np.testing.assert_allclose(cfg.build_gains().phi, [-0.3, 0.5], atol=1e-12)
    x0, x_hat0 = cfg.initial_states()
    np.testing.assert_allclose(x0, [0.0, 50 * math.sin(0.1)])
    np.testing.assert_array_equal(x0, x_hat0)
    assert cfg.build_plant().f([0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert cfg.build_kernel().lipschitz() == pytest.approx(0.0303265, abs=1e-7)


def test_replace():
    cfg = paper_config().replace(**{"simulation.steps": 5, "acquisition.seed": 9})
    assert cfg.steps == 5
    assert cfg.acquisition_seed == 9
    assert paper_config().steps == 200


@pytest.mark.parametrize("path, value", [
    ("plant.step_seconds", KeyError),
    ("plant.step_seconds", -0.2),
    ("plant.v_bar", "small"),
    ("plant.order", 2.5),
    ("plant.nonlinearity", "cubic"),
    ("plant.noise", "pink"),
    ("plant.noise", 3),
    ("plant.safe_set", {"lower": [-13.0, -5.0], "upper": [10.0, 5.0]}),
    ("plant.domain", {"lower": [12.0, -6.0], "upper": [-12.0, 6.0]}),
    ("kernel.length_scale", 0),
    ("rkhs_bound", -1),
    ("reference.driving", "square"),
    ("reference.initial_state", [1.0]),
    ("poles.controller", [0.8]),
    ("poles.observer", [[0.1, 0.2], 0.3]),
    ("lyapunov_q", [[1.0, 0.0], [0.0, 1.0]]),
    ("lyapunov_q", -1.0),
    ("acquisition.episodes", -1),
    ("acquisition.policy", "greedy"),
    ("acquisition.reset_radius", -1.0),
    ("acquisition.reset_radius", "near"),
    ("simulation.seeds", []),
    ("simulation.x0", [0.0, "a"]),
    ("grid_per_dim", 1),
])
def test_field_precise_errors(path, value):
    with pytest.raises(ConfigError) as excinfo:
        ExperimentConfig.from_dict(broken(path, value))
    assert excinfo.value.field.startswith(path)
    assert excinfo.value.exit_code == 2


def test_missing_section():
    data = copy.deepcopy(PAPER_CONFIG)
    del data["kernel"]
    with pytest.raises(ConfigError) as excinfo:
        ExperimentConfig.from_dict(data)
    assert excinfo.value.field == "kernel"


def test_complex_poles_and_matrix_q():
    data = broken("poles.controller", [[0.5, 0.2], [0.5, -0.2]])
    data["lyapunov_q"] = np.diag([1.0, 2.0, 3.0, 4.0]).tolist()
    cfg = ExperimentConfig.from_dict(data)
    assert cfg.controller_poles == (0.5 + 0.2j, 0.5 - 0.2j)
    assert cfg.q_matrix[3, 3] == 4.0


def test_optional_grid():
    cfg = ExperimentConfig.from_dict(broken("grid_per_dim", KeyError))
    assert cfg.grid_per_dim is None


def test_load_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ not json")
    with pytest.raises(ConfigError) as excinfo:
        load(str(path))
    assert excinfo.value.field == "<file>"


def test_noise_choice():
    assert paper_config().noise == "uniform"
    cfg = ExperimentConfig.from_dict(broken("plant.noise", "truncated_gaussian"))
    source = cfg.noise_source(4)
    assert type(source).__name__ == "TruncatedGaussianNoise"
    assert all(abs(source.sample()) <= cfg.v_bar for _ in range(200))
    assert ExperimentConfig.from_dict(broken("plant.noise", KeyError)).noise == "uniform"


def test_reset_radius():
    assert paper_config().exploration_policy().reset_radius == 1.0
    cfg = ExperimentConfig.from_dict(broken("acquisition.reset_radius", KeyError))
    assert cfg.reset_radius is None
    assert cfg.exploration_policy().reset_radius is None
