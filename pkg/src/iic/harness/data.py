"""Dataset ingestion: MNIST IDX files and a synthetic fallback."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import RegressionDataset, substream
from ..errors import ContractViolation, FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
MNIST_ENV = "IIC_MNIST_DIR"
MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(buf: bytes, magic: int, ndim: int, what: str) -> np.ndarray:
    if len(buf) < 4:
        raise FormatError(f"{what}: file too short for a magic number ({len(buf)} bytes)", offset=len(buf))
    (got,) = struct.unpack_from(">I", buf, 0)
    if got != magic:
        raise FormatError(f"{what}: bad magic 0x{got:08x}, expected 0x{magic:08x}", offset=0)
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise FormatError(f"{what}: truncated header, expected {header} bytes, got {len(buf)}", offset=len(buf))
    dims = struct.unpack_from(">" + "I" * ndim, buf, 4)
    expected = header + int(np.prod(dims))
    if len(buf) != expected:
        raise FormatError(f"{what}: expected {expected} bytes for dims {dims}, got {len(buf)}",
                          offset=min(len(buf), expected))
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist_idx(images_path, labels_path) -> RegressionDataset:
    """Images scaled to [0, 1] as inputs; digit / 10 as a scalar target."""
    images = _parse_idx(_read_bytes(images_path), IMAGES_MAGIC, 3, str(images_path))
    labels = _parse_idx(_read_bytes(labels_path), LABELS_MAGIC, 1, str(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return RegressionDataset(x, labels.astype(float)[:, None] / 10.0)


def find_mnist(directory=None) -> tuple[Path, Path] | None:
    """Locate the training image/label files in ``directory`` or ``$IIC_MNIST_DIR``."""
    directory = directory or os.environ.get(MNIST_ENV)
    if not directory:
        return None
    found = []
    for stem in MNIST_FILES:
        for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
            p = Path(directory) / name
            if p.exists():
                found.append(p)
                break
        else:
            return None
    return found[0], found[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian inputs in R^p with target ``sin(|x|) + noise * N(0, 1)``."""

    n: int = 700
    p: int = 20
    noise: float = 0.1

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.noise < 0:
            raise ContractViolation(f"invalid synthetic spec {self}")


def synthetic_dataset(spec: SyntheticSpec, seed: int) -> RegressionDataset:
    rng = substream(seed, 0)
    x = rng.standard_normal((spec.n, spec.p))
    y = np.sin(np.linalg.norm(x, axis=1))
    if spec.noise > 0:
        y = y + spec.noise * rng.standard_normal(spec.n)
    return RegressionDataset(x, y[:, None])
