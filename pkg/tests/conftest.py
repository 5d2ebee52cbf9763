import numpy as np
import pytest

from hiedge import DeviceProfile, SampleRecord, SynthConfig, Trace, generate_synthetic


def make_record(sample_id, true_label, exits, server_label):
    return SampleRecord(
        sample_id=sample_id,
        true_label=true_label,
        exit_softmax=tuple(tuple(v) for v in exits),
        server_label=server_label,
    )


def make_trace(records, num_classes, num_exits, metadata=None):
    return Trace.from_records(num_classes, num_exits, records, metadata)


def random_trace(rng, n=100, num_classes=4, num_exits=2, server_accuracy=0.9):
    """Small random trace via the synthetic generator, seeded from rng."""
    cfg = SynthConfig(
        num_samples=n,
        num_classes=num_classes,
        num_exits=num_exits,
        exit_accuracies=tuple(sorted(rng.uniform(0.3, 0.95, size=num_exits))),
        server_accuracy=server_accuracy,
        separation=rng.uniform(0.5, 4.0),
        seed=int(rng.integers(0, 2**31)),
    )
    return generate_synthetic(cfg)


@pytest.fixture
def rpi_profile():
    """Single-exit profile with the measured Raspberry Pi CIFAR-10 numbers."""
    return DeviceProfile(
        name="raspberry-pi-cifar10",
        exit_latency_ms=(1.63,),
        exit_energy_mj=(6.22,),
        lr_latency_ms=0.102,
        lr_energy_mj=0.36,
        offload_latency_ms=9.68,
        offload_energy_mj=27.67,
    )


@pytest.fixture
def two_exit_profile():
    return DeviceProfile(
        name="two-exit-demo",
        exit_latency_ms=(2.0, 5.0),
        exit_energy_mj=(7.0, 18.0),
        lr_latency_ms=0.1,
        lr_energy_mj=0.3,
        offload_latency_ms=10.0,
        offload_energy_mj=30.0,
    )


def profile_for(trace, base_latency=1.0, base_energy=3.0,
                lr_latency=0.1, lr_energy=0.3, off_latency=10.0, off_energy=30.0):
    E = trace.num_exits
    return DeviceProfile(
        name="generated",
        exit_latency_ms=tuple(base_latency * (k + 1) for k in range(E)),
        exit_energy_mj=tuple(base_energy * (k + 1) for k in range(E)),
        lr_latency_ms=lr_latency,
        lr_energy_mj=lr_energy,
        offload_latency_ms=off_latency,
        offload_energy_mj=off_energy,
    )
