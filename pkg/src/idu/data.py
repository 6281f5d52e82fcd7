"""MNIST-style data pipeline: IDX parsing, 28x28 -> 10x10 downscale, angle
scaling, seeded splits, pixel shuffling and the binary angle cache."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_UBYTE = 0x08
FULL_SIZES = (48_000, 12_000, 10_000)
SOURCE_SIZE = 28
TARGET_SIZE = 10

CACHE_MAGIC = b"IDUD"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sIII")
# largest float32 not above pi; float32(pi) itself rounds up past pi
_F32_PI = np.nextafter(np.float32(np.pi), np.float32(0))

SPLIT_NAMES = ("train", "validation", "test")
IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


class IdxFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class CacheFormatError(ValueError):
    pass


def parse_idx(buf: bytes) -> np.ndarray:
    """Decode an unsigned-byte IDX file into an array of its declared shape."""
    if len(buf) < 4:
        raise IdxFormatError(f"file too short for IDX magic ({len(buf)} bytes)", 0)
    if buf[0] != 0 or buf[1] != 0:
        raise IdxFormatError("bad IDX magic, expected two zero bytes", 0)
    if buf[2] != IDX_UBYTE:
        raise IdxFormatError(f"unsupported IDX type byte 0x{buf[2]:02x}", 2)
    ndim = buf[3]
    header_len = 4 + 4 * ndim
    if len(buf) < header_len:
        raise IdxFormatError(
            f"truncated header: need {header_len} bytes for {ndim} dims, have {len(buf)}", len(buf))
    shape = struct.unpack(f">{ndim}I", buf[4:header_len])
    expected = int(np.prod(shape, dtype=np.int64))
    actual = len(buf) - header_len
    if actual != expected:
        raise IdxFormatError(
            f"payload size mismatch: expected {expected} bytes, found {actual}", header_len)
    return np.frombuffer(buf, dtype=np.uint8, offset=header_len).reshape(shape).copy()


def serialize_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise TypeError(f"only uint8 arrays can be written as IDX, got {array.dtype}")
    if array.ndim > 255:
        raise ValueError("too many dimensions for IDX")
    header = bytes([0, 0, IDX_UBYTE, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def read_idx(path) -> np.ndarray:
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


# --------------------------------------------------------------------------
# image transforms
# --------------------------------------------------------------------------


def _interp_matrix(src: int, dst: int) -> np.ndarray:
    """Row ``i`` holds the linear weights sampling ``src`` at output pixel ``i``."""
    scale = src / dst
    coord = np.clip((np.arange(dst) + 0.5) * scale - 0.5, 0, src - 1)
    lo = np.floor(coord).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = coord - lo
    w = np.zeros((dst, src))
    w[np.arange(dst), lo] += 1 - frac
    w[np.arange(dst), hi] += frac
    return w


_W = _interp_matrix(SOURCE_SIZE, TARGET_SIZE)


def bilinear_downscale(img) -> np.ndarray:
    """Bilinear 28x28 -> 10x10 resize with half-pixel centres and edge clamping.

    Accepts a single image ``(28, 28)`` or a stack ``(N, 28, 28)``.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape[-2:] != (SOURCE_SIZE, SOURCE_SIZE):
        raise ValueError(f"expected 28x28 images, got shape {img.shape}")
    return _W @ img @ _W.T


def scale_to_angles(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size and (grid.min() < 0 or grid.max() > 255):
        raise ValueError(f"pixel values must lie in [0, 255], got [{grid.min()}, {grid.max()}]")
    return grid * (np.pi / 255.0)


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------


@dataclass
class ImageSet:
    """Angle-encoded images ``(N, 10, 10)`` in [0, pi] and labels ``(N,)``."""

    angles: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.angles) != len(self.labels):
            raise ValueError("angles and labels differ in length")

    def __len__(self):
        return len(self.labels)

    @property
    def features(self) -> np.ndarray:
        """Row-major flattening: feature ``10 * row + col``."""
        return self.angles.reshape(len(self), -1)

    def head(self, n: int) -> "ImageSet":
        return ImageSet(self.angles[:n], self.labels[:n])


@dataclass
class DatasetSplit:
    train: ImageSet
    validation: ImageSet
    test: ImageSet
    seed: int | None = None

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def subset(self, n_train: int) -> "DatasetSplit":
        """Prefixes of each split, validation and test scaled 12:48 and 10:48.

        The split itself was drawn by a seeded shuffle, so prefixes are random
        subsets and stay disjoint.
        """
        n_val = n_train * FULL_SIZES[1] // FULL_SIZES[0]
        n_test = n_train * FULL_SIZES[2] // FULL_SIZES[0]
        if n_train > len(self.train) or n_val > len(self.validation) or n_test > len(self.test):
            raise ValueError(f"subset {n_train} exceeds split sizes {self.sizes()}")
        return DatasetSplit(self.train.head(n_train), self.validation.head(n_val),
                            self.test.head(n_test), self.seed)


def split_indices(n: int, seed: int, sizes) -> list[np.ndarray]:
    if any(s < 0 for s in sizes) or sum(sizes) > n:
        raise ValueError(f"split sizes {tuple(sizes)} exceed dataset size {n}")
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.cumsum([0, *sizes])
    return [order[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def make_split(angles, labels, seed: int, sizes=FULL_SIZES) -> DatasetSplit:
    """Seeded shuffle of all indices, then contiguous train/val/test blocks."""
    angles = np.asarray(angles)
    labels = np.asarray(labels)
    parts = split_indices(len(labels), seed, sizes)
    sets = [ImageSet(angles[idx], labels[idx]) for idx in parts]
    return DatasetSplit(*sets, seed=seed)


def pixel_permutation(seed: int, num_pixels: int = TARGET_SIZE * TARGET_SIZE) -> np.ndarray:
    return np.random.default_rng(seed).permutation(num_pixels)


def shuffle_pixels(split: DatasetSplit, seed: int | None = None,
                   permutation=None) -> DatasetSplit:
    """Apply one fixed pixel permutation to every image of every split.

    Pass ``permutation`` to force a specific one (e.g. the identity).
    """
    if permutation is None:
        if seed is None:
            raise ValueError("need a seed or an explicit permutation")
        permutation = pixel_permutation(seed)
    perm = np.asarray(permutation)
    if sorted(perm.tolist()) != list(range(TARGET_SIZE * TARGET_SIZE)):
        raise ValueError("not a permutation of the 100 pixel positions")

    def apply(s: ImageSet) -> ImageSet:
        flat = s.features[:, perm]
        return ImageSet(flat.reshape(s.angles.shape), s.labels.copy())

    return DatasetSplit(apply(split.train), apply(split.validation), apply(split.test), split.seed)


def load_raw(input_dir) -> tuple[np.ndarray, np.ndarray]:
    """All 70,000 images (train file then test file) and their labels."""
    input_dir = Path(input_dir)
    arrays = {}
    for key, name in IDX_FILES.items():
        path = input_dir / name
        if not path.exists() and not Path(str(path) + ".gz").exists():
            raise FileNotFoundError(f"missing IDX file {path}")
        arrays[key] = read_idx(path)
    images = np.concatenate([arrays["train_images"], arrays["test_images"]])
    labels = np.concatenate([arrays["train_labels"], arrays["test_labels"]])
    if images.ndim != 3 or images.shape[1:] != (SOURCE_SIZE, SOURCE_SIZE):
        raise ValueError(f"expected 28x28 images, got {images.shape}")
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    return images, labels


def preprocess(images) -> np.ndarray:
    return scale_to_angles(bilinear_downscale(images))


def prepare(input_dir, seed: int = 0, sizes=FULL_SIZES,
            shuffle_seed: int | None = None) -> DatasetSplit:
    images, labels = load_raw(input_dir)
    split = make_split(preprocess(images), labels, seed, sizes)
    if shuffle_seed is not None:
        split = shuffle_pixels(split, shuffle_seed)
    return split


# --------------------------------------------------------------------------
# binary cache
# --------------------------------------------------------------------------


def encode_cache(images: ImageSet) -> bytes:
    """16-byte header ``IDUD, version, count, label offset`` (little-endian
    u32), float32 angles, then one label byte per image."""
    count = len(images)
    angles = np.minimum(images.features.astype("<f4"), _F32_PI)
    payload = angles.tobytes()
    label_offset = _CACHE_HEADER.size + len(payload)
    header = _CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, count, label_offset)
    return header + payload + np.asarray(images.labels, dtype=np.uint8).tobytes()


def decode_cache(buf: bytes) -> ImageSet:
    if len(buf) < _CACHE_HEADER.size:
        raise CacheFormatError("cache file shorter than its header")
    magic, version, count, label_offset = _CACHE_HEADER.unpack_from(buf)
    if magic != CACHE_MAGIC:
        raise CacheFormatError(f"bad cache magic {magic!r}")
    if version != CACHE_VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    npix = TARGET_SIZE * TARGET_SIZE
    if label_offset != _CACHE_HEADER.size + 4 * npix * count or len(buf) != label_offset + count:
        raise CacheFormatError("cache size does not match its header")
    angles = np.frombuffer(buf, dtype="<f4", count=count * npix, offset=_CACHE_HEADER.size)
    labels = np.frombuffer(buf, dtype=np.uint8, count=count, offset=label_offset)
    return ImageSet(angles.astype(np.float64).reshape(count, TARGET_SIZE, TARGET_SIZE),
                    labels.astype(np.int64))


def cache_path(directory, split_name: str) -> Path:
    return Path(directory) / f"{split_name}.idud"


def write_bytes_atomic(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_split(split: DatasetSplit, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, images in zip(SPLIT_NAMES, (split.train, split.validation, split.test)):
        write_bytes_atomic(cache_path(directory, name), encode_cache(images))


def load_split(directory) -> DatasetSplit:
    sets = []
    for name in SPLIT_NAMES:
        path = cache_path(directory, name)
        if not path.exists():
            raise FileNotFoundError(f"missing cache file {path}")
        sets.append(decode_cache(path.read_bytes()))
    return DatasetSplit(*sets)
