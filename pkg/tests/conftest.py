"""Shared fixtures: synthetic datasets and real-data discovery."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from chainfuse.datasets import FeatureSpec, MultiLabelDataset, parse_dataset

DATA_ENV = "CHAINFUSE_DATA_DIR"


def data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV, Path(__file__).resolve().parent.parent / "data"))


def load_benchmark(name: str) -> MultiLabelDataset:
    """Load <name>.arff / <name>.xml from the data directory or skip the test."""
    base = data_dir()
    arff = base / f"{name}.arff"
    xml = base / f"{name}.xml"
    if not (arff.exists() and xml.exists()):
        pytest.skip(
            f"benchmark dataset {name!r} not found under {base} "
            f"(set ${DATA_ENV} or run `chainfuse fetch {name} --dest {base}` "
            "on a machine with network access)"
        )
    return parse_dataset(arff.read_text(), xml.read_text())


def make_synthetic(
    n: int = 120,
    m: int = 4,
    n_features: int = 6,
    seed: int = 0,
    label_noise: float = 0.1,
    correlated_pair: tuple[int, int] | None = None,
) -> MultiLabelDataset:
    """Gaussian features with label-dependent shifts; optionally ties one
    label pair together so they are strongly phi-correlated."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=(n, m)).astype(np.int8)
    if correlated_pair is not None:
        a, b = correlated_pair
        labels[:, b] = labels[:, a]
        flip = rng.random(n) < label_noise
        labels[flip, b] ^= 1
    shifts = rng.normal(0.0, 1.5, size=(m, n_features))
    features = rng.normal(0.0, 1.0, size=(n, n_features)) + labels @ shifts
    schema = tuple(FeatureSpec(f"f{i}", "numeric") for i in range(n_features))
    return MultiLabelDataset(
        feature_schema=schema,
        features=features,
        labels=labels,
        label_names=tuple(f"L{j}" for j in range(m)),
        relation="synthetic",
    )


@pytest.fixture
def synthetic_ds() -> MultiLabelDataset:
    return make_synthetic()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance check at the end of the run."""
    del exitstatus, config
    entries = []
    for status in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance" in getattr(report, "nodeid", ""):
                entries.append((report.nodeid.split("::")[-1], status.upper()))
    if not entries:
        return
    terminalreporter.section("acceptance checks")
    for name, status in sorted(entries):
        terminalreporter.write_line(f"{status:8s} {name}")
