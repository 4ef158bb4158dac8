import math

import numpy as np
import pytest

from learntrack.errors import ConfigError, InputError, PropagationError
from learntrack.core.kernels import KernelSpec
from learntrack.core.plant import (
    Box, Interval, PlantConfig, ReferenceSpec, UniformNoise, TruncatedGaussianNoise,
    ConstantDrive, PaperSine, plant_step, measure, reference_step, reference_trajectory,
    registry_lookup, get_registered_nonlinearities, driver_lookup, noise_lookup,
    simulate_open_loop, RkhsSample)

DOMAIN = Box([-12.0, -6.0], [12.0, 6.0])
SAFE = DOMAIN.shrink(0.1)


def make_plant(name="zero", order=2, v_bar=0.01):
    if order == 2:
        domain, safe = DOMAIN, SAFE
    else:
        domain, safe = Box([-10.0] * order, [10.0] * order), Box([-9.0] * order, [9.0] * order)
    return PlantConfig(order=order, step=0.2, f=registry_lookup(name), v_bar=v_bar,
                       domain=domain, safe_set=safe, input_set=Interval(-20.0, 20.0))


def test_plant_step_integrator():
    np.testing.assert_allclose(plant_step(make_plant(), [1.0, 2.0], 0.0), [1.4, 0.0])


def test_plant_step_paper_nonlinearity():
    cfg = make_plant("paper_sim")
    assert cfg.f([0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(plant_step(cfg, [0.0, 0.0], 1.0), [0.0, 1.0], atol=1e-15)


def test_plant_step_first_order():
    cfg = make_plant(order=1)
    assert plant_step(cfg, [3.0], 2.5).tolist() == [2.5]


def test_plant_step_non_finite():
    with pytest.raises(PropagationError):
        plant_step(make_plant(), [float("nan"), 0.0], 0.0)
    with pytest.raises(PropagationError):
        plant_step(make_plant(), [0.0, 0.0], float("inf"))


def test_plant_step_outside_domain_warns(caplog):
    plant_step(make_plant(), [50.0, 0.0], 0.0)
    assert "outside the domain" in caplog.text


def test_measure_noiseless():
    cfg = make_plant(v_bar=0.0)
    assert measure(cfg, np.array([1.25, -3.0]), UniformNoise(0, 0.0)) == 1.25


def test_uniform_noise_is_bounded():
    noise = UniformNoise(11, 0.01)
    draws = noise.rng.uniform(-noise.bound, noise.bound, size=10 ** 6)
    assert np.abs(draws).max() <= 0.01
    assert all(abs(noise.sample()) <= 0.01 for _ in range(1000))


def test_noise_is_deterministic():
    a, b = UniformNoise(5, 0.01), UniformNoise(5, 0.01)
    assert [a.sample() for _ in range(100)] == [b.sample() for _ in range(100)]


def test_truncated_gaussian_noise_is_bounded():
    noise = TruncatedGaussianNoise(3, 0.01)
    assert all(abs(noise.sample()) <= 0.01 for _ in range(500))
    assert TruncatedGaussianNoise(3, 0.0).sample() == 0.0


def test_noise_lookup():
    assert noise_lookup("uniform") is UniformNoise
    assert noise_lookup("truncated_gaussian") is TruncatedGaussianNoise
    with pytest.raises(ConfigError) as excinfo:
        noise_lookup("pink")
    assert excinfo.value.field == "plant.noise"


def test_reference_step():
    spec = ReferenceSpec(ConstantDrive(3.0), [1.0, 5.0], 0.2)
    np.testing.assert_allclose(reference_step(spec, [1.0, 5.0], 0), [2.0, 3.0])


def test_reference_at_rest():
    spec = ReferenceSpec(driver_lookup("zero"), [0.0, 0.0], 0.2)
    assert np.all(reference_trajectory(spec, 50) == 0.0)


def test_paper_reference():
    r = PaperSine()
    spec = ReferenceSpec(r, r.initial_state(2), 0.2)
    assert spec.initial_state.tolist() == [0.0, 50 * math.sin(0.1)]
    s = reference_trajectory(spec, 200)
    assert s.shape == (201, 2)
    # s_2(k) = 50 sin(0.1 (k + 1)) - 50 sin(0.1 k) and s_1 stays near 10 sin(0.1 k)
    k = np.arange(201)
    np.testing.assert_allclose(s[:, 1], 50 * (np.sin(0.1 * (k + 1)) - np.sin(0.1 * k)), atol=1e-9)
    assert np.abs(s[:, 0]).max() < 10.8
    assert np.abs(s[:, 1]).max() < 5.4


def test_reference_trajectory_start():
    r = PaperSine()
    spec = ReferenceSpec(r, r.initial_state(2), 0.2)
    full = reference_trajectory(spec, 30)
    np.testing.assert_allclose(reference_trajectory(spec, 10, start=20), full[20:])


def test_driver_lookup():
    assert driver_lookup("constant:1.5")(7) == 1.5
    assert driver_lookup("paper_sine").name == "paper_sine"
    with pytest.raises(ConfigError):
        driver_lookup("square")
    with pytest.raises(ConfigError):
        driver_lookup("constant:abc")


def test_registry():
    assert get_registered_nonlinearities() == ["paper_sim", "rkhs_sample", "zero"]
    assert registry_lookup("zero")([4.0, 1.0]) == 0.0
    assert registry_lookup("paper_sim")([0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ConfigError):
        registry_lookup("cubic")


def test_paper_nonlinearity_vectorized():
    f = registry_lookup("paper_sim")
    X = DOMAIN.grid(11)
    np.testing.assert_allclose(f.many(X), [f(x) for x in X], atol=1e-15)


def test_rkhs_sample_norm():
    kernel = KernelSpec(0.5, 5.0, 2)
    f = registry_lookup("rkhs_sample:7", kernel=kernel, domain=DOMAIN)
    a = f.coefficients
    K = np.array([[kernel.evaluate(p, q) for q in f.centers] for p in f.centers])
    assert f.rkhs_norm == pytest.approx(math.sqrt(a @ K @ a))

    scaled = registry_lookup("rkhs_sample:7", kernel=kernel, domain=DOMAIN, rkhs_norm=0.3)
    assert scaled.rkhs_norm == pytest.approx(0.3)
    np.testing.assert_allclose(scaled.centers, f.centers)


def test_rkhs_sample_needs_context():
    with pytest.raises(ConfigError):
        registry_lookup("rkhs_sample:1")
    with pytest.raises(InputError):
        RkhsSample(KernelSpec(1.0, 1.0, 1), [[0.0], [1.0]], [1.0])


def test_plant_config_validation():
    with pytest.raises(InputError):
        PlantConfig(order=2, step=0.0, f=registry_lookup("zero"), v_bar=0.01,
                    domain=DOMAIN, safe_set=SAFE, input_set=Interval(-1, 1))
    with pytest.raises(InputError):
        PlantConfig(order=2, step=0.2, f=registry_lookup("zero"), v_bar=0.01,
                    domain=SAFE, safe_set=DOMAIN, input_set=Interval(-1, 1))


def test_box():
    assert SAFE.lower.tolist() == pytest.approx([-10.8, -5.4])
    assert SAFE.upper.tolist() == pytest.approx([10.8, 5.4])
    assert SAFE.issubset(DOMAIN)
    assert DOMAIN.contains([12.0, -6.0])
    assert not DOMAIN.contains([12.1, 0.0])
    assert DOMAIN.grid(3).shape == (9, 2)
    assert DOMAIN.inflate(1.0).upper.tolist() == [13.0, 7.0]


def test_interval_clip():
    i = Interval(-20.0, 20.0)
    assert i.clip(25.0) == 20.0
    assert i.contains(-20.0)
    assert not i.contains(-20.5)


def test_simulate_open_loop():
    cfg = make_plant(v_bar=0.0)
    states, outputs = simulate_open_loop(cfg, [0.0, 0.0], [1.0, 1.0, 1.0], UniformNoise(0, 0.0))
    np.testing.assert_allclose(states, [[0, 0], [0, 1], [0.2, 1], [0.4, 1]])
    np.testing.assert_allclose(outputs, [0, 0, 0.2])
