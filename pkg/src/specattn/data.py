"""Datasets: synthetic generators, delimited-file I/O, normalization,
stratified splitting, mini-batching, and noise injection.

Datasets are treated as immutable after construction; every operation
returns a new dataset. All randomness flows through explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Frequency table per class for the three-class synthetic set. The literal
# preset keeps the original pairs even though, on an integer sample grid of
# length 100, cos(2*pi*80*t/100) == cos(2*pi*20*t/100) makes classes 2 and 3
# identical in distribution. The well-posed preset swaps class 3 to (1, 40),
# which stays below the Nyquist bin and keeps all three classes separable.
FREQ_PRESETS: dict[str, tuple[tuple[float, float], ...]] = {
    "paper": ((1, 5), (1, 20), (1, 80)),
    "well-posed": ((1, 5), (1, 20), (1, 40)),
}


@dataclass(frozen=True)
class LabeledDataset:
    series: np.ndarray  # [instances, length] float64
    labels: np.ndarray  # [instances] int64 in [0, class_count)
    class_count: int
    name: str = ""

    def __post_init__(self):
        series = np.asarray(self.series, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if series.ndim != 2:
            raise ValueError(f"series must be a [instances, length] matrix, got shape {series.shape}")
        if labels.shape != (series.shape[0],):
            raise ValueError("labels must have one entry per series")
        if not np.all(np.isfinite(series)):
            raise ValueError("series contain non-finite values")
        if series.shape[0] and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "labels", labels)

    @property
    def num_instances(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int = 0

    def indices(self, partition: str) -> np.ndarray:
        if partition not in ("train", "val", "test"):
            raise ValueError(f"unknown partition {partition!r}")
        return getattr(self, partition)


def gen_synthetic(
    n_per_class: int = 2000,
    length: int = 100,
    sigma: float = 2.0,
    freqs: tuple[tuple[float, float], ...] = FREQ_PRESETS["paper"],
    seed: int = 0,
) -> LabeledDataset:
    """Cosine-pair classes in Gaussian noise.

    Class c sample: cos(2*pi*f1*t/length) + cos(2*pi*f2*t/length) + noise,
    with t = 1..length and noise ~ N(0, sigma^2) i.i.d.
    """
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng([seed, 0x5A17])
    t = np.arange(1, length + 1)
    rows = []
    labels = []
    for c, (f1, f2) in enumerate(freqs):
        clean = np.cos(2 * np.pi * f1 * t / length) + np.cos(2 * np.pi * f2 * t / length)
        noise = rng.normal(0.0, sigma, size=(n_per_class, length)) if sigma > 0 else 0.0
        rows.append(np.broadcast_to(clean, (n_per_class, length)) + noise)
        labels.append(np.full(n_per_class, c))
    return LabeledDataset(
        np.concatenate(rows), np.concatenate(labels), class_count=len(freqs), name="synthetic"
    )


def gen_phase_dataset(
    n_per_class: int = 500,
    length: int = 100,
    sigma: float = 1.0,
    freq_lo: int = 4,
    freq_hi: int = 6,
    seed: int = 0,
) -> LabeledDataset:
    """Two classes that differ only in where their frequencies live in time.

    Each half of the series is a half-length cosine burst; class 0 puts the
    low frequency first, class 1 the reverse order. The bursts are sampled at
    half-integer phase, cos(2*pi*f*(n+1/2)/half), which makes each half
    mirror-symmetric, so class 1 is exactly class 0 reversed in time and the
    two classes have identical whole-series magnitude spectra while their
    half-series spectra are one-hot at different bins. A whole-series
    spectral front end therefore cannot separate them, but a segmented one
    can.
    """
    if length < 4 or length % 2:
        raise ValueError(f"length must be even and >= 4, got {length}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    half = length // 2
    if not (1 <= freq_lo < freq_hi and 2 * freq_hi < half):
        raise ValueError(f"need 1 <= freq_lo < freq_hi and 2*freq_hi < {half}")
    rng = np.random.default_rng([seed, 0xFA5E])
    n = np.arange(half)
    burst = lambda f: np.cos(2 * np.pi * f * (n + 0.5) / half)
    template_a = np.concatenate([burst(freq_lo), burst(freq_hi)])
    template_b = template_a[::-1]
    rows = []
    labels = []
    for c, template in enumerate((template_a, template_b)):
        noise = rng.normal(0.0, sigma, size=(n_per_class, length)) if sigma > 0 else 0.0
        rows.append(np.broadcast_to(template, (n_per_class, length)) + noise)
        labels.append(np.full(n_per_class, c))
    return LabeledDataset(np.concatenate(rows), np.concatenate(labels), class_count=2, name="phase")


def load_ucr(path) -> LabeledDataset:
    """Load a delimited label-then-values file (archive convention).

    Each line is a class label followed by the series values; comma or tab
    delimited (auto-detected from the first line). Labels are remapped to
    0..C-1 preserving their sorted original order.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: file contains no data")
    delimiter = "\t" if "\t" in lines[0] else ","
    rows = []
    raw_labels = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        fields = line.split(delimiter)
        if width is None:
            width = len(fields)
            if width < 2:
                raise ValueError(f"{path}: line {lineno}: expected a label and at least one value")
        elif len(fields) != width:
            raise ValueError(
                f"{path}: line {lineno}: expected {width} fields, got {len(fields)}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: non-numeric field ({exc})") from None
        raw_labels.append(values[0])
        rows.append(values[1:])
    raw = np.asarray(raw_labels)
    classes = np.unique(raw)
    labels = np.searchsorted(classes, raw)
    return LabeledDataset(np.asarray(rows), labels, class_count=len(classes), name=path.stem)


def save_ucr(ds: LabeledDataset, path, original_labels: np.ndarray | None = None) -> None:
    """Write a dataset in the same delimited format that :func:`load_ucr` reads."""
    path = Path(path)
    labels = ds.labels if original_labels is None else np.asarray(original_labels)
    with path.open("w") as fh:
        for label, row in zip(labels, ds.series):
            fh.write(",".join([repr(int(label))] + [repr(float(v)) for v in row]))
            fh.write("\n")


def znormalize(ds: LabeledDataset) -> LabeledDataset:
    """Per-series standardization to zero mean, unit (biased) std.

    Constant series map to all zeros via the 1e-8 std floor.
    """
    mean = ds.series.mean(axis=1, keepdims=True)
    std = ds.series.std(axis=1, keepdims=True)
    normalized = (ds.series - mean) / np.maximum(std, 1e-8)
    return LabeledDataset(normalized, ds.labels, ds.class_count, ds.name)


def split_dataset(ds: LabeledDataset, seed: int = 0) -> SplitSpec:
    """Seeded stratified 6:2:2 split (per-class proportions within one)."""
    rng = np.random.default_rng([seed, 0x5EED])
    train, val, test = [], [], []
    for c in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == c)
        rng.shuffle(idx)
        m = len(idx)
        b1 = int(np.floor(0.6 * m + 0.5))
        b2 = int(np.floor(0.8 * m + 0.5))
        train.append(idx[:b1])
        val.append(idx[b1:b2])
        test.append(idx[b2:])
    return SplitSpec(
        np.concatenate(train), np.concatenate(val), np.concatenate(test), seed=seed
    )


def add_noise(ds: LabeledDataset, sigma_rel: float, seed: int = 0) -> LabeledDataset:
    """Add white noise with std sigma_rel times the dataset's global std."""
    if sigma_rel < 0:
        raise ValueError(f"sigma_rel must be >= 0, got {sigma_rel}")
    if sigma_rel == 0:
        return ds
    rng = np.random.default_rng([seed, 0x0153])
    scale = sigma_rel * ds.series.std()
    noisy = ds.series + rng.normal(0.0, scale, size=ds.series.shape)
    return LabeledDataset(noisy, ds.labels, ds.class_count, ds.name)


def batches(
    ds: LabeledDataset,
    indices: np.ndarray,
    batch_size: int = 128,
    rng: np.random.Generator | None = None,
):
    """Yield ([B, 1, n], labels) mini-batches over ``indices``.

    With an rng the index order is shuffled (fresh permutation per call);
    without one the given order is kept. The last partial batch is yielded.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.array(indices)
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        yield ds.series[chunk][:, None, :], ds.labels[chunk]
