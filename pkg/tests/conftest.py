import numpy as np
import pytest

from uavmec.energy import ComputeModel
from uavmec.instance import ProblemInstance
from uavmec.scenario import ScenarioConfig, build_instance, validate


def make_synthetic_instance(
    n_vehicles=1,
    n_slots=1,
    gain=5000.0,
    min_bits=5e5,
    weight_uav=0.1,
    power_max=10 ** 3.5 / 1000.0,
    slot_len=0.2,
    output_ratio=0.8,
    bandwidth=5e6,
):
    """Rank-1 constant-gain instance with hand-controllable numbers.

    `gain` is the per-watt SNR of every link (scalar or per-phase list), so
    phase rates are bandwidth * log2(1 + p * gain).
    """
    gains_in = np.atleast_1d(np.asarray(gain, dtype=float))
    if gains_in.size == 1:
        gains_in = np.repeat(gains_in, 4)
    k, n = n_vehicles, n_slots
    return ProblemInstance(
        n_vehicles=k,
        n_slots=n,
        slot_len=slot_len,
        weights_vehicle=np.ones(k),
        weight_uav=weight_uav,
        vehicle_compute=ComputeModel(1e9, 1e3, 1e-27),
        uav_compute=ComputeModel(3e9, 1e3, 1e-27),
        output_ratio=np.full(k, output_ratio),
        min_bits=np.full((k, n), float(min_bits)),
        bandwidth=bandwidth,
        power_max=np.full(4, power_max),
        gains=[np.full((k, n, 1), gains_in[ph]) for ph in range(4)],
    )


@pytest.fixture(scope="session")
def table1_cfg():
    return validate(ScenarioConfig())


@pytest.fixture(scope="session")
def table1_inst(table1_cfg):
    return build_instance(table1_cfg)


@pytest.fixture(scope="session")
def table1_report(table1_cfg, table1_inst):
    from uavmec.optimizer import algorithm1

    return algorithm1(table1_inst, eps=table1_cfg.epsilon,
                      max_iterations=table1_cfg.max_iterations)
