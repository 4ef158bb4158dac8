from blinker import Namespace

namespace = Namespace()

episode_finished = namespace.signal("acquisition.episode-finished")
input_clamped = namespace.signal("acquisition.input-clamped")
safe_set_violation = namespace.signal("acquisition.safe-set-violation")
dataset_collected = namespace.signal("acquisition.dataset-collected")

model_fitted = namespace.signal("krr.model-fitted")
beta_clamped = namespace.signal("krr.beta-clamped")

pole_outside_unit_disk = namespace.signal("synthesis.pole-outside-unit-disk")
certificate_computed = namespace.signal("synthesis.certificate-computed")

simulation_finished = namespace.signal("controller.simulation-finished")
simulation_aborted = namespace.signal("controller.simulation-aborted")
