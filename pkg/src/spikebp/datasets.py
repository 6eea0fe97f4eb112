"""Dataset acquisition and parsing: MNIST / Fashion-MNIST in gzipped IDX
format, and the 1797-sample 8x8 digits corpus as a 65-column CSV.

Downloads go through a per-file lock, are written to a temp name, checksum
verified, then renamed, so concurrent invocations are safe and a partial
file is never visible under the final name. The digits CSV is generated once
into the cache from scikit-learn's bundled copy when absent; its 0-16 pixel
range is clamped to 0-15 at load time (with a warning) to match the 4-bit
input range of the hardware pipeline.

Cache location: ``$SPIKEBP_CACHE`` if set, else ``~/.cache/spikebp``.
"""

from __future__ import annotations

import csv
import gzip
import hashlib
import os
import struct
import urllib.error
import urllib.request
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

__all__ = [
    "Sample",
    "SampleSet",
    "DatasetSpec",
    "DatasetError",
    "DownloadError",
    "ChecksumError",
    "MNIST",
    "FASHION_MNIST",
    "DIGITS",
    "SPECS",
    "default_cache_dir",
    "fetch",
    "load_idx",
    "load_digits_csv",
    "split",
    "stratified_subset",
    "load_dataset",
]


class DatasetError(Exception):
    """Base class for dataset acquisition/parsing failures."""


class DownloadError(DatasetError):
    """No mirror could deliver a required file."""


class ChecksumError(DatasetError):
    """A file's MD5 did not match its spec (cache corruption or bad mirror)."""


@dataclass(frozen=True)
class Sample:
    pixels: np.ndarray
    label: int


@dataclass
class SampleSet:
    """Batch of samples: ``pixels`` is ``[N, P]`` integer intensities in
    ``[0, i_max]``, ``labels`` is ``[N]``. Validated on construction."""

    pixels: np.ndarray
    labels: np.ndarray
    i_max: int
    name: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.pixels.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("pixels must be [N, P], labels [N]")
        if self.pixels.shape[0] != self.labels.shape[0]:
            raise ValueError("pixels/labels count mismatch")
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > self.i_max):
            raise ValueError(f"pixel values outside [0, {self.i_max}]")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("negative label")

    def __len__(self):
        return self.labels.shape[0]

    def __getitem__(self, i) -> Sample:
        return Sample(self.pixels[i], int(self.labels[i]))

    def subset(self, indices) -> "SampleSet":
        idx = np.asarray(indices)
        return SampleSet(self.pixels[idx], self.labels[idx], self.i_max, self.name)


@dataclass(frozen=True)
class DatasetFile:
    filename: str
    md5: str = None


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset comes from and what it must look like when it lands."""

    name: str
    mirrors: tuple
    files: tuple
    i_max: int
    expected_counts: tuple = ()


MNIST = DatasetSpec(
    name="mnist",
    mirrors=(
        "https://ossci-datasets.s3.amazonaws.com/mnist/",
        "http://yann.lecun.com/exdb/mnist/",
    ),
    files=(
        DatasetFile("train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
        DatasetFile("train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"),
        DatasetFile("t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"),
        DatasetFile("t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"),
    ),
    i_max=255,
    expected_counts=(60000, 10000),
)

FASHION_MNIST = DatasetSpec(
    name="fashion-mnist",
    mirrors=("http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",),
    files=(
        DatasetFile("train-images-idx3-ubyte.gz", "8d4fb7e6c68d591d4c3dfef9ec88bf0d"),
        DatasetFile("train-labels-idx1-ubyte.gz", "25c81989df183df01b3e8a0aad5dffbe"),
        DatasetFile("t10k-images-idx3-ubyte.gz", "bef4ecab320f06d8554ea6380940ec79"),
        DatasetFile("t10k-labels-idx1-ubyte.gz", "bb300cfdad3c16e7a12a480ee83cd310"),
    ),
    i_max=255,
    expected_counts=(60000, 10000),
)

# generated locally from scikit-learn's bundled copy, so no mirror/checksum
DIGITS = DatasetSpec(
    name="digits",
    mirrors=(),
    files=(DatasetFile("digits8x8.csv"),),
    i_max=15,
    expected_counts=(1797,),
)

SPECS = {s.name: s for s in (MNIST, FASHION_MNIST, DIGITS)}


def default_cache_dir() -> Path:
    env = os.environ.get("SPIKEBP_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "spikebp"


def _md5(path: Path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _download(url: str, dest_tmp: Path):
    with urllib.request.urlopen(url, timeout=60) as resp, open(dest_tmp, "wb") as out:
        while True:
            chunk = resp.read(1 << 20)
            if not chunk:
                break
            out.write(chunk)


def _write_digits_csv(dest: Path):
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        raise DatasetError(
            f"the 8x8 digits corpus is generated from scikit-learn, which is not "
            f"installed; either `pip install scikit-learn` or place a 65-column "
            f"CSV (64 pixels 0-16 + label) at {dest}"
        ) from None
    bunch = load_digits()
    pixels = bunch.data.astype(np.int64)
    labels = bunch.target.astype(np.int64)
    tmp = dest.with_name(dest.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        writer = csv.writer(f)
        for row, lab in zip(pixels, labels):
            writer.writerow([*row.tolist(), int(lab)])
    os.replace(tmp, dest)


def fetch(spec: DatasetSpec, cache_dir=None):
    """Ensure all of ``spec``'s files exist in the cache with good checksums;
    returns their paths. Idempotent; never re-downloads a verified file."""
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache = cache / spec.name
    cache.mkdir(parents=True, exist_ok=True)
    paths = []
    for fspec in spec.files:
        dest = cache / fspec.filename
        with FileLock(str(dest) + ".lock"):
            if dest.exists():
                if fspec.md5 is not None and _md5(dest) != fspec.md5:
                    raise ChecksumError(f"cached file {dest} fails its MD5 check; delete it and re-fetch")
                paths.append(dest)
                continue
            if not spec.mirrors:
                _write_digits_csv(dest)
                paths.append(dest)
                continue
            tmp = dest.with_name(dest.name + ".part")
            last_error = None
            for mirror in spec.mirrors:
                url = mirror + fspec.filename
                try:
                    _download(url, tmp)
                except (urllib.error.URLError, OSError) as exc:
                    last_error = f"{url}: {exc}"
                    continue
                if fspec.md5 is not None and _md5(tmp) != fspec.md5:
                    tmp.unlink(missing_ok=True)
                    raise ChecksumError(f"download of {fspec.filename} from {url} fails its MD5 check")
                os.replace(tmp, dest)
                break
            else:
                raise DownloadError(f"could not retrieve {fspec.filename}; last error: {last_error}")
            paths.append(dest)
    return paths


def _open_maybe_gzip(path: Path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path) -> SampleSet:
    """Parse an IDX image/label file pair (big-endian, magic-numbered) into a
    flat-pixel SampleSet with ``i_max = 255``."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with _open_maybe_gzip(images_path) as f:
        data = f.read()
    if len(data) < 16:
        raise DatasetError(f"{images_path}: truncated IDX image header")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != 0x00000803:
        raise DatasetError(f"{images_path}: bad IDX image magic {magic:#010x}")
    if len(data) - 16 != n * rows * cols:
        raise DatasetError(f"{images_path}: expected {n * rows * cols} pixel bytes, found {len(data) - 16}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        ldata = f.read()
    if len(ldata) < 8:
        raise DatasetError(f"{labels_path}: truncated IDX label header")
    lmagic, ln = struct.unpack(">II", ldata[:8])
    if lmagic != 0x00000801:
        raise DatasetError(f"{labels_path}: bad IDX label magic {lmagic:#010x}")
    if len(ldata) - 8 != ln:
        raise DatasetError(f"{labels_path}: expected {ln} label bytes, found {len(ldata) - 8}")
    if ln != n:
        raise DatasetError(f"image count {n} != label count {ln}")
    labels = np.frombuffer(ldata, dtype=np.uint8, offset=8)
    return SampleSet(pixels.astype(np.int64), labels.astype(np.int64), i_max=255)


def load_digits_csv(path) -> SampleSet:
    """Parse the 8x8 digits CSV (64 integer pixels + label per row). Source
    pixels above 15 are clamped to 15 — the input range is 4-bit — with one
    summary warning; malformed rows report their line number."""
    path = Path(path)
    pixel_rows = []
    labels = []
    clamped = 0
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if len(row) != 65:
                raise DatasetError(f"{path}:{lineno}: expected 65 comma-separated fields, got {len(row)}")
            try:
                values = [int(tok) for tok in row]
            except ValueError:
                bad = next(tok for tok in row if not tok.strip().lstrip("+-").isdigit())
                raise DatasetError(f"{path}:{lineno}: non-integer field {bad!r}") from None
            label = values[64]
            if not 0 <= label <= 9:
                raise DatasetError(f"{path}:{lineno}: label {label} outside [0, 9]")
            px = np.array(values[:64], dtype=np.int64)
            if px.min() < 0:
                raise DatasetError(f"{path}:{lineno}: negative pixel value {px.min()}")
            over = px > 15
            if over.any():
                clamped += int(over.sum())
                px[over] = 15
            pixel_rows.append(px)
            labels.append(label)
    if clamped:
        warnings.warn(f"{path}: clamped {clamped} pixel values above 15 down to 15 (4-bit input range)")
    if not pixel_rows:
        raise DatasetError(f"{path}: no samples")
    return SampleSet(np.stack(pixel_rows), np.array(labels), i_max=15, name="digits")


def split(samples: SampleSet, ratio: float, seed: int):
    """Deterministic class-stratified split into ``(train, test)``; ``ratio``
    is the training fraction, strictly between 0 and 1."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for lab in np.unique(samples.labels):
        idx = np.nonzero(samples.labels == lab)[0]
        perm = rng.permutation(idx)
        k = int(round(ratio * len(idx)))
        k = min(max(k, 1), len(idx) - 1)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return samples.subset(train_idx), samples.subset(test_idx)


def stratified_subset(samples: SampleSet, n: int, seed: int) -> SampleSet:
    """Seeded subset of size ~``n`` with per-class proportions preserved."""
    if not 0 < n <= len(samples):
        raise ValueError(f"subset size must be in [1, {len(samples)}]")
    rng = np.random.default_rng(seed)
    take = []
    frac = n / len(samples)
    for lab in np.unique(samples.labels):
        idx = np.nonzero(samples.labels == lab)[0]
        perm = rng.permutation(idx)
        take.append(perm[: max(1, int(round(frac * len(idx))))])
    return samples.subset(np.sort(np.concatenate(take)))


def load_dataset(name: str, cache_dir=None, split_ratio: float = 0.8, split_seed: int = 0):
    """Fetch (if needed) and load a dataset by name; returns ``(train, test)``.
    MNIST variants use their published split; digits uses a seeded stratified
    80/20 split because the corpus ships unsplit."""
    if name not in SPECS:
        raise DatasetError(f"unknown dataset {name!r}; known: {', '.join(sorted(SPECS))}")
    spec = SPECS[name]
    paths = fetch(spec, cache_dir)
    if name == "digits":
        full = load_digits_csv(paths[0])
        return split(full, split_ratio, split_seed)
    train = load_idx(paths[0], paths[1])
    test = load_idx(paths[2], paths[3])
    train.name = test.name = name
    n_train, n_test = spec.expected_counts
    if len(train) != n_train or len(test) != n_test:
        raise DatasetError(f"{name}: expected {n_train}/{n_test} samples, loaded {len(train)}/{len(test)}")
    return train, test
