import numpy as np
import pytest

from conftest import make_synthetic_instance
from uavmec.energy import ComputeModel
from uavmec.protocol import (
    Allocation,
    BitSplit,
    ZeroRateWithBits,
    baseline_allocation,
    check_feasible,
    phase_durations,
    tccd,
    wtec,
)

VEH = ComputeModel(1e9, 1e3, 1e-27)
UAV = ComputeModel(3e9, 1e3, 1e-27)


def test_phase_durations_all_zero_split():
    sched = phase_durations(BitSplit(0, 0, 0), 1e7, 1e7, 1e7, 0.8, VEH, UAV)
    assert sched.occupied == 0.0
    assert sched.local_compute == 0.0


def test_uav_compute_phase_duration():
    sched = phase_durations(BitSplit(0, 1e5, 0), 1e7, 1e7, 1e7, 0.8, VEH, UAV)
    assert np.isclose(sched.uav_compute, 1e5 * 1e3 / 3e9)  # 33.3 ms


def test_local_compute_spans_full_slot_at_cap():
    sched = phase_durations(BitSplit(2e5, 0, 0), 1e7, 1e7, 1e7, 0.8, VEH, UAV)
    assert np.isclose(sched.local_compute, 0.2)


def test_zero_rate_with_bits_raises():
    with pytest.raises(ZeroRateWithBits):
        phase_durations(BitSplit(0, 0, 1e4), 0.0, 1e7, 1e7, 0.8, VEH, UAV)


def test_doubling_rates_halves_transmission_phases():
    split = BitSplit(0, 2e4, 3e4)
    slow = phase_durations(split, 1e7, 1e7, 1e7, 0.8, VEH, UAV)
    fast = phase_durations(split, 2e7, 2e7, 2e7, 0.8, VEH, UAV)
    assert np.isclose(fast.offload, slow.offload / 2)
    assert np.isclose(fast.relay, slow.relay / 2)
    assert np.isclose(fast.down_uav, slow.down_uav / 2)
    assert np.isclose(fast.down_rsu, slow.down_rsu / 2)
    assert fast.uav_compute == slow.uav_compute


def test_zero_allocation_feasible_when_no_bits_required():
    inst = make_synthetic_instance(n_vehicles=2, n_slots=3, min_bits=0.0)
    alloc = Allocation.zeros(2, 3)
    verdict = check_feasible(alloc, inst)
    assert verdict.feasible and not verdict.violations


def test_uplink_capacity_violation_is_reported():
    inst = make_synthetic_instance(min_bits=0.0)
    alloc = Allocation.zeros(1, 1)
    alloc.bits_uav[0, 0] = 1e5
    alloc.power_offload[0, 0] = 0.01
    alloc.time_offload[0, 0] = 1e-4  # far too short to carry the bits
    verdict = check_feasible(alloc, inst)
    assert not verdict.feasible
    assert any(v.startswith("uplink_capacity") for v in verdict.violations)


def test_min_bits_violation_is_reported():
    inst = make_synthetic_instance(min_bits=1e5)
    verdict = check_feasible(Allocation.zeros(1, 1), inst)
    assert any(v.startswith("min_bits") for v in verdict.violations)


def test_power_cap_violation_is_reported():
    inst = make_synthetic_instance(min_bits=0.0)
    alloc = Allocation.zeros(1, 1)
    alloc.power_relay[0, 0] = inst.power_max[1] * 2
    verdict = check_feasible(alloc, inst)
    assert any(v.startswith("power_cap_relay") for v in verdict.violations)


def test_tccd_zero_allocation():
    inst = make_synthetic_instance(min_bits=0.0)
    assert tccd(Allocation.zeros(1, 1), inst) == 0.0


def test_tccd_sums_five_phases():
    inst = make_synthetic_instance(min_bits=0.0)
    alloc = Allocation.zeros(1, 1)
    alloc.time_offload[0, 0] = 1e-3
    alloc.time_relay[0, 0] = 2e-3
    alloc.bits_uav[0, 0] = 3e-3 * 3e9 / 1e3  # 3 ms of UAV compute
    alloc.time_down_uav[0, 0] = 4e-3
    alloc.time_down_rsu[0, 0] = 5e-3
    assert np.isclose(tccd(alloc, inst), 15e-3)
    # local compute joins only via the flag
    alloc.bits_local[0, 0] = 1e5
    assert np.isclose(tccd(alloc, inst), 15e-3)
    assert np.isclose(tccd(alloc, inst, include_local=True), 15e-3 + 0.1)


def test_wtec_zero_allocation():
    inst = make_synthetic_instance(n_vehicles=2, n_slots=4, min_bits=0.0)
    assert wtec(Allocation.zeros(2, 4), inst) == 0.0


def test_wtec_local_only_over_horizon():
    # one vehicle computing its 0.2 Mbit cap locally every slot for 40 slots
    inst = make_synthetic_instance(n_vehicles=1, n_slots=40, min_bits=2e5)
    alloc = Allocation.zeros(1, 40)
    alloc.bits_local[:] = 2e5
    assert np.isclose(wtec(alloc, inst), 8.0, rtol=1e-9)


def test_wtec_linear_in_vehicle_weights():
    inst = make_synthetic_instance(n_vehicles=2, n_slots=2, min_bits=1e5)
    alloc = Allocation.zeros(2, 2)
    alloc.bits_local[:] = 1e5
    alloc.power_offload[:] = 0.5
    alloc.time_offload[:] = 1e-3
    base = wtec(alloc, inst)
    inst.weights_vehicle = inst.weights_vehicle * 2.0
    assert np.isclose(wtec(alloc, inst), 2.0 * base, rtol=1e-12)


def test_wtec_invariant_under_vehicle_permutation():
    inst = make_synthetic_instance(n_vehicles=3, n_slots=2, min_bits=2e5)
    rng = np.random.default_rng(0)
    alloc = Allocation.zeros(3, 2)
    for name in vars(alloc):
        setattr(alloc, name, rng.uniform(0.0, 1e-3, (3, 2)))
    alloc.bits_local = rng.uniform(0, 1e5, (3, 2))
    alloc.bits_uav = rng.uniform(0, 1e5, (3, 2))
    alloc.bits_rsu = rng.uniform(0, 1e5, (3, 2))
    perm = [2, 0, 1]
    swapped = Allocation(**{k: np.array(v[perm]) for k, v in vars(alloc).items()})
    assert np.isclose(wtec(alloc, inst), wtec(swapped, inst), rtol=1e-12)


def test_baseline_allocation_structure():
    inst = make_synthetic_instance(n_vehicles=3, n_slots=2, min_bits=5e5)
    alloc = baseline_allocation(inst)
    total = alloc.bits_local + alloc.bits_uav + alloc.bits_rsu
    assert np.allclose(total, inst.min_bits)
    assert np.allclose(alloc.bits_local, np.minimum(5e5 / 3, inst.bits_local_cap))
    assert (alloc.power_offload == inst.power_max[0]).all()
    # durations exactly carry the bits
    carried = alloc.time_offload * inst.rate(0, alloc.power_offload)
    assert np.allclose(carried, alloc.bits_uav + alloc.bits_rsu, rtol=1e-9)
