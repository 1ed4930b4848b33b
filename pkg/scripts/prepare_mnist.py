"""Write the 5000-image MNIST sample bundled with mlxtend as IDX files.

The bundled sample is sorted by class, so it is shuffled with a fixed seed
before splitting: the first 4000 images become the training file and the
last 1000 the test file.

    python scripts/prepare_mnist.py data/mnist
"""

import argparse
from pathlib import Path

import numpy as np

from qahan.ingest import write_mnist


def export(out_dir, seed: int = 20240501) -> dict:
    from mlxtend.data import mnist_data

    images, labels = mnist_data()
    order = np.random.default_rng(seed).permutation(len(labels))
    images = images[order].reshape(-1, 28, 28).astype(np.uint8)
    labels = labels[order].astype(np.uint8)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "train_images": out / "train-images-idx3-ubyte",
        "train_labels": out / "train-labels-idx1-ubyte",
        "test_images": out / "t10k-images-idx3-ubyte",
        "test_labels": out / "t10k-labels-idx1-ubyte",
    }
    write_mnist(paths["train_images"], paths["train_labels"], images[:4000], labels[:4000])
    write_mnist(paths["test_images"], paths["test_labels"], images[4000:], labels[4000:])
    return {k: str(v) for k, v in paths.items()}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", nargs="?", default="data/mnist")
    args = parser.parse_args()
    for name, path in export(args.out_dir).items():
        print(f"{name}: {path}")
