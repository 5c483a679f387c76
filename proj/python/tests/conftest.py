import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]

# Shrinks the benchmark so a full search runs in seconds.
SMALL = [
    "data.synthetic.n_train=60",
    "data.synthetic.n_val=40",
    "train.epochs=3",
    "image_backbone.width=16",
    "text_backbone.width=16",
    "fusion.d_alg=8",
    "fusion.d_k=8",
]


@pytest.fixture(scope="session")
def benchmark_config():
    return os.environ.get("DFPROBE_BENCHMARK_CONFIG", str(ROOT / "configs" / "benchmark.json"))


@pytest.fixture(scope="session")
def small_overrides():
    return list(SMALL)


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("DFPROBE_CLI", str(ROOT / "build" / "tools" / "dfprobe"))
    if not os.path.exists(path):
        pytest.skip("dfprobe CLI not built")
    return path
