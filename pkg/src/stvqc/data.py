"""Synthetic Bloch-sphere datasets and MNIST-style image ingestion.

Two dataset families:

- RY-plane family (L1, N1, N3, N5): points on the great circle phi in {0, pi},
  parameterized by a single circle angle t in [0, 2pi). L1 is two disjoint
  arcs, one per class. The N-sets are four alternating arcs whose labeling is
  pi-periodic (antipodal points share a class), which defeats any classifier
  of the form sign(a cos t + b sin t) exactly.
- Octant family (L2, N2, N4, N6): points sampled on the full sphere, labeled
  by octant. L2 is the x > 0 hemisphere; N2 gives each octant the majority
  sign of its coordinates (antipodal octants therefore always differ); N4 and
  N6 label by the sign of x*y and y*z respectively (antipodal-invariant, so
  any centered-hemisphere classifier scores exactly 50%).

Region boundaries for the N-sets are fixed constants chosen so the
separability certificates below hold; the figures they stand in for do not
publish exact coordinates.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import bloch_encoder
from .sim import Circuit

DATASET_IDS = ("L1", "L2", "N1", "N2", "N3", "N4", "N5", "N6")
RY_FAMILY = ("L1", "N1", "N3", "N5")
OCTANT_FAMILY = ("L2", "N2", "N4", "N6")

_PI = math.pi
_GAP = 0.02 * _PI  # margin trimmed off every arc end

def _alternating_arcs(width: float, rot: float) -> dict[int, list[tuple[float, float]]]:
    """Four alternating circle arcs, pi-periodic: class 0 owns [rot, rot+width)
    and its antipode; class 1 owns the rest. The rotation makes one class-1 arc
    wrap through t = 0, which keeps the best single-threshold cut below 75%."""
    return {0: [(rot, rot + width), (rot + _PI, rot + _PI + width)],
            1: [(rot + width, rot + _PI), (rot + _PI + width, rot + 2 * _PI)]}


# Per-class circle arcs (start, end) in t for the RY-plane family; arcs may
# exceed 2 pi and are wrapped at sampling time. The N-set patterns repeat with
# period pi so that antipodal points share a label.
_ARCS = {
    "L1": {0: [(0.15 * _PI, 0.85 * _PI)],
           1: [(1.15 * _PI, 1.85 * _PI)]},
    "N1": _alternating_arcs(0.55 * _PI, 0.20 * _PI),
    "N3": _alternating_arcs(0.60 * _PI, 0.20 * _PI),
    "N5": _alternating_arcs(0.50 * _PI, 0.30 * _PI),
}

_OCTANT_MARGIN = {"L2": 0.10, "N2": 0.15, "N4": 0.15, "N6": 0.15}


class DataError(Exception):
    pass


@dataclass(frozen=True)
class BlochSample:
    """A labeled point on the Bloch sphere."""

    theta: float  # polar angle, [0, pi]
    phi: float  # azimuthal angle, [0, 2pi)
    label: int

    def __post_init__(self):
        if not 0.0 <= self.theta <= _PI + 1e-12:
            raise DataError(f"theta {self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * _PI + 1e-12:
            raise DataError(f"phi {self.phi} outside [0, 2 pi)")


@dataclass(frozen=True)
class ImageSample:
    """A grayscale image with values in [0, 1]."""

    pixels: tuple  # rows of floats
    label: int

    def array(self) -> np.ndarray:
        return np.array(self.pixels, dtype=float)


@dataclass(frozen=True)
class DatasetSpec:
    id: str
    n_train: int = 1600
    n_test: int = 320
    seed: int = 0

    def __post_init__(self):
        if self.id not in DATASET_IDS:
            raise DataError(f"unknown dataset id {self.id!r}")
        if self.n_train < 1 or self.n_test < 1:
            raise DataError("dataset sizes must be positive")


def circle_angle(sample: BlochSample) -> float:
    """The RY-plane circle parameter t: theta on the phi=0 half, 2 pi - theta
    on the phi=pi half."""
    return sample.theta if sample.phi < _PI / 2 else 2 * _PI - sample.theta


def _sample_to_circle(t: float, label: int) -> BlochSample:
    t = t % (2 * _PI)
    if t <= _PI:
        return BlochSample(t, 0.0, label)
    return BlochSample(2 * _PI - t, _PI, label)


def _gen_ry_family(spec: DatasetSpec, n: int, rng: np.random.Generator) -> list[BlochSample]:
    arcs_by_class = _ARCS[spec.id]
    out: list[BlochSample] = []
    quotas = {0: (n + 1) // 2, 1: n // 2}
    for label, quota in quotas.items():
        arcs = [(a + _GAP, b - _GAP) for a, b in arcs_by_class[label]]
        lengths = np.array([b - a for a, b in arcs])
        total = lengths.sum()
        for _ in range(quota):
            u = rng.uniform(0, total)
            for (a, b), ln in zip(arcs, lengths):
                if u <= ln:
                    out.append(_sample_to_circle(a + u, label))
                    break
                u -= ln
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def _octant_label(x: float, y: float, z: float, dataset_id: str) -> int:
    if dataset_id == "L2":
        return int(x > 0)
    if dataset_id == "N2":
        # int casts keep the count arithmetic even for numpy bool scalars
        return int(int(x > 0) + int(y > 0) + int(z > 0) >= 2)
    if dataset_id == "N4":
        return int(x * y > 0)
    return int(y * z > 0)  # N6


def _gen_octant_family(spec: DatasetSpec, n: int, rng: np.random.Generator) -> list[BlochSample]:
    margin = _OCTANT_MARGIN[spec.id]
    relevant = {"L2": (0,), "N2": (0, 1, 2), "N4": (0, 1), "N6": (1, 2)}[spec.id]
    need = {0: (n + 1) // 2, 1: n // 2}
    out: list[BlochSample] = []
    while need[0] > 0 or need[1] > 0:
        z = rng.uniform(-1.0, 1.0)
        phi = rng.uniform(0.0, 2 * _PI)
        s = math.sqrt(max(0.0, 1.0 - z * z))
        v = (s * math.cos(phi), s * math.sin(phi), z)
        if min(abs(v[i]) for i in relevant) < margin:
            continue
        label = _octant_label(*v, spec.id)
        if need[label] == 0:
            continue
        need[label] -= 1
        out.append(BlochSample(math.acos(max(-1.0, min(1.0, z))), phi, label))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def gen_bloch(spec: DatasetSpec) -> tuple[list[BlochSample], list[BlochSample]]:
    """Deterministic (train, test) split; each side is class-balanced to +-1."""
    rng = np.random.default_rng(spec.seed)
    gen = _gen_ry_family if spec.id in RY_FAMILY else _gen_octant_family
    train = gen(spec, spec.n_train, rng)
    test = gen(spec, spec.n_test, rng)
    return train, test


# -- feature / state views ---------------------------------------------------

def bloch_state(sample: BlochSample, dataset_id: str) -> np.ndarray:
    """The sample's single-qubit state. RY-plane samples stay real:
    (cos t/2, sin t/2) with t the circle angle; octant samples get the phase
    e^{i phi} on the |1> amplitude."""
    if dataset_id in RY_FAMILY:
        t = circle_angle(sample)
        return np.array([math.cos(t / 2), math.sin(t / 2)], dtype=complex)
    return np.array([math.cos(sample.theta / 2),
                     np.exp(1j * sample.phi) * math.sin(sample.theta / 2)])


def encode_bloch(sample: BlochSample, dataset_id: str) -> np.ndarray:
    """Classical feature vector: the state's real amplitudes for the RY-plane
    family (2 features) or its flattened real/imag parts (4 features)."""
    psi = bloch_state(sample, dataset_id)
    if dataset_id in RY_FAMILY:
        return psi.real.copy()
    return np.array([psi[0].real, psi[0].imag, psi[1].real, psi[1].imag])


def encoder_circuit(sample: BlochSample, dataset_id: str, copies: int) -> Circuit:
    """Quantum encoder: ``copies`` identical single-qubit preparations."""
    if dataset_id in RY_FAMILY:
        return bloch_encoder(circle_angle(sample), 0.0, copies)
    return bloch_encoder(sample.theta, sample.phi, copies)


def features_and_labels(samples: list[BlochSample], dataset_id: str
                        ) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([encode_bloch(s, dataset_id) for s in samples])
    y = np.array([s.label for s in samples], dtype=int)
    return X, y


def threshold_sweep(values: np.ndarray, labels: np.ndarray) -> float:
    """Best accuracy of any single threshold on a scalar (either polarity)."""
    order = np.argsort(values)
    y = np.asarray(labels)[order]
    n = len(y)
    ones_below = np.concatenate([[0], np.cumsum(y)])
    total_ones = ones_below[-1]
    best = 0.0
    for k in range(n + 1):  # predict class 1 above the k-th point
        correct_hi = (total_ones - ones_below[k]) + (k - ones_below[k])
        best = max(best, correct_hi, n - correct_hi)
    return best / n


# -- serialization -----------------------------------------------------------

def save_bloch_csv(samples: list[BlochSample], path) -> None:
    with open(path, "w") as fh:
        fh.write("theta,phi,label\n")
        for s in samples:
            fh.write(f"{s.theta:.12g},{s.phi:.12g},{s.label}\n")


def load_bloch_csv(path) -> list[BlochSample]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "theta,phi,label":
            raise DataError(f"unexpected header {header!r} in {path}")
        for line in fh:
            theta, phi, label = line.strip().split(",")
            out.append(BlochSample(float(theta), float(phi), int(label)))
    return out


def save_dataset(spec: DatasetSpec, out_dir) -> dict:
    """Write <id>_train.csv, <id>_test.csv and a manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = gen_bloch(spec)
    save_bloch_csv(train, out_dir / f"{spec.id}_train.csv")
    save_bloch_csv(test, out_dir / f"{spec.id}_test.csv")
    manifest = {"id": spec.id, "n_train": spec.n_train, "n_test": spec.n_test,
                "seed": spec.seed}
    with open(out_dir / f"{spec.id}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


# -- image ingestion ---------------------------------------------------------

def read_idx(path) -> np.ndarray:
    """Read an IDX file (the standard MNIST container format)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated IDX header")
    zero, dtype_code, ndim = raw[0] << 8 | raw[1], raw[2], raw[3]
    if zero != 0 or dtype_code != 0x08:  # unsigned byte payloads only
        raise DataError(f"{path}: unsupported IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    if data.size != int(np.prod(dims)):
        raise DataError(f"{path}: payload size mismatch")
    return data.reshape(dims)


def downsample_pool(image: np.ndarray, out_shape: tuple[int, int] = (4, 4)) -> np.ndarray:
    """Non-overlapping average pooling (28x28 -> 4x4 uses 7x7 cells)."""
    h, w = image.shape
    oh, ow = out_shape
    if h % oh or w % ow:
        raise DataError(f"{image.shape} not divisible into {out_shape} cells")
    return image.reshape(oh, h // oh, ow, w // ow).mean(axis=(1, 3))


def ingest_images(images_path, labels_path, classes: tuple[int, int] = (3, 6),
                  downsample_to: tuple[int, int] = (4, 4)) -> list[ImageSample]:
    """Load an IDX image/label pair, keep only ``classes`` (relabeled 0/1),
    average-pool to ``downsample_to``, and scale intensities to [0, 1]."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1 or len(images) != len(labels):
        raise DataError("image/label files do not match")
    out = []
    for img, lab in zip(images, labels):
        if lab not in classes:
            continue
        small = downsample_pool(img.astype(float) / 255.0, downsample_to)
        small = np.clip(small, 0.0, 1.0)
        out.append(ImageSample(tuple(map(tuple, small)), classes.index(lab)))
    if not out:
        raise DataError(f"no images with labels {classes}")
    return out
