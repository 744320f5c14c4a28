"""Datasets: IDX (MNIST-style) files and seeded synthetic blobs."""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataset, FormatError, InvalidInput

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    x: np.ndarray  # (N, d_in), values in [0, 1]
    labels: np.ndarray | None = None
    name: str = "data"
    image_shape: tuple | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if len(self.labels) != len(self.x):
                raise InvalidInput("labels and inputs differ in length")
            if len(self.labels) and self.labels.min() < 0:
                raise InvalidInput("labels must be nonnegative")

    def __len__(self):
        return len(self.x)

    @property
    def d_in(self):
        return self.x.shape[1]

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if self.labels is not None and len(self.labels) else 0

    def subset(self, idx, name=None):
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.x[idx], None if self.labels is None else self.labels[idx],
                       name or self.name, self.image_shape)

    def split(self, n_first, seed=0):
        """Seeded shuffle, then (first n_first rows, the rest)."""
        order = np.random.default_rng(seed).permutation(len(self))
        return self.subset(order[:n_first]), self.subset(order[n_first:])


def read_idx(images_path, labels_path=None):
    """Parse big-endian IDX image (and label) files; pixels scaled by 1/255."""
    with open(images_path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise FormatError("image file too short for an IDX header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if body.size != n * rows * cols:
        raise FormatError(f"image payload has {body.size} bytes, header implies {n * rows * cols}")
    x = body.reshape(n, rows * cols).astype(np.float64) / 255.0

    labels = None
    if labels_path is not None:
        with open(labels_path, "rb") as fh:
            lraw = fh.read()
        if len(lraw) < 8:
            raise FormatError("label file too short for an IDX header")
        lmagic, ln = struct.unpack(">II", lraw[:8])
        if lmagic != LABELS_MAGIC:
            raise FormatError(f"bad label magic 0x{lmagic:08x}")
        if ln != n:
            raise FormatError(f"{n} images but {ln} labels")
        labels = np.frombuffer(lraw, dtype=np.uint8, offset=8).astype(int)
        if labels.size != ln:
            raise FormatError("label payload length does not match header")
    return Dataset(x, labels, name=str(images_path), image_shape=(rows, cols))


def write_idx(path_images, x, image_shape, path_labels=None, labels=None):
    """Write IDX files (used for fixtures and exports)."""
    rows, cols = image_shape
    pix = np.clip(np.rint(np.asarray(x) * 255.0), 0, 255).astype(np.uint8)
    with open(path_images, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, len(pix), rows, cols))
        fh.write(pix.tobytes())
    if path_labels is not None:
        lab = np.asarray(labels, dtype=np.uint8)
        with open(path_labels, "wb") as fh:
            fh.write(struct.pack(">II", LABELS_MAGIC, len(lab)))
            fh.write(lab.tobytes())


def synth_blobs(classes=2, per_class=200, dim=2, separation=10.0, seed=0):
    """Unit-variance Gaussian clusters whose centers are pairwise >= separation apart.

    The whole cloud is then mapped into [0, 1]^dim by one global affine map
    (same scale on every axis), so separability survives the rescaling.
    """
    if classes < 2 or dim < 2:
        raise InvalidInput("need classes >= 2 and dim >= 2")
    if per_class <= 0:
        raise DegenerateDataset("per_class must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((classes, dim))
    gaps = [np.linalg.norm(centers[i] - centers[j]) for i in range(classes) for j in range(i + 1, classes)]
    centers *= separation / min(gaps)
    x = np.concatenate([c + rng.standard_normal((per_class, dim)) for c in centers])
    labels = np.repeat(np.arange(classes), per_class)
    lo, hi = x.min(), x.max()
    x = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    order = rng.permutation(len(x))
    return Dataset(x[order], labels[order], name=f"blobs-{classes}x{per_class}-d{dim}-s{seed}")
