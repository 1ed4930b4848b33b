import importlib.util
import itertools
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]

ACCEPTANCE_RESULTS = {}


def all_masks(n):
    """Every mask of length n in lexicographic order (x[0] most significant)."""
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.float64)


def random_symmetric(rng, n, scale=1.0):
    a = rng.normal(scale=scale, size=(n, n))
    return (a + a.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_files(tmp_path_factory):
    """IDX files built from the MNIST sample bundled with mlxtend."""
    pytest.importorskip("mlxtend")
    spec = importlib.util.spec_from_file_location("prepare_mnist", ROOT / "scripts" / "prepare_mnist.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod.export(tmp_path_factory.mktemp("mnist"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


def tiny_run_config(root, n_train=24, n_test=12, size=8, **overrides):
    """Write a small synthetic IDX dataset plus a JSON config that trains in seconds."""
    import json

    from qahan.ingest import write_mnist

    gen = np.random.default_rng(99)
    data = root / "data"
    data.mkdir(parents=True, exist_ok=True)
    for split, n in (("train", n_train), ("t10k", n_test)):
        labels = gen.integers(0, 10, n)
        images = gen.integers(0, 40, (n, size, size))
        # brightness pattern depends on the label so the net has something to fit
        images[np.arange(n), labels % size, :] = 255
        write_mnist(data / f"{split}-images", data / f"{split}-labels", images, labels)
    cfg = {
        "dataset": {
            "name": "mnist",
            "train_images": str(data / "train-images"),
            "train_labels": str(data / "train-labels"),
            "test_images": str(data / "t10k-images"),
            "test_labels": str(data / "t10k-labels"),
            "train_size": n_train,
            "test_size": n_test,
        },
        "network": {
            "image_size": size,
            "conv1": {"out_channels": 4},
            "conv2": {"out_channels": 4},
            "batch_size": 8,
            "epochs": 2,
            "qaham": {"k": 6},
        },
        "solver": {"backend": "sa", "sweeps": 50},
        "seed": 5,
        "output_dir": str(root / "run"),
    }
    for key, value in overrides.items():
        cfg[key] = {**cfg[key], **value} if isinstance(value, dict) else value
    path = root / "config.json"
    path.write_text(json.dumps(cfg))
    return path
