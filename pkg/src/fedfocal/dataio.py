"""File formats: IDX image/label files, numeric CSV, and the run cache.

IDX is the MNIST distribution format: big-endian magic, dimension header,
then raw unsigned bytes. Gzip-wrapped payloads are accepted transparently.
The cache format is a little-endian packed float64 matrix plus a JSON
manifest, written by ``prepare`` so experiment runs skip re-parsing.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .data import Dataset
from .exceptions import (
    ConfigurationError,
    DataFormatError,
    DataLengthError,
    DimensionError,
    DomainError,
    ParseError,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

CACHE_MAGIC = b"FFD1"


def _maybe_gunzip(payload: bytes) -> bytes:
    if payload[:2] == b"\x1f\x8b":
        return gzip.decompress(payload)
    return payload


def _read_header(payload: bytes, magic: int, n_dims: int) -> tuple[tuple[int, ...], int]:
    header_len = 4 * (1 + n_dims)
    if len(payload) < header_len:
        raise DataFormatError(f"IDX header truncated: {len(payload)} bytes")
    fields = struct.unpack(f">{1 + n_dims}I", payload[:header_len])
    if fields[0] != magic:
        raise DataFormatError(f"bad IDX magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return fields[1:], header_len


def parse_idx_images(payload: bytes) -> np.ndarray:
    """IDX image payload to a (count, rows, cols) uint8 tensor, byte-exact."""
    payload = _maybe_gunzip(payload)
    (count, rows, cols), offset = _read_header(payload, IDX_IMAGE_MAGIC, 3)
    expected = count * rows * cols
    body = payload[offset:]
    if len(body) != expected:
        raise DataLengthError(
            f"IDX image payload holds {len(body)} bytes, header promises {expected}"
        )
    return np.frombuffer(body, dtype=np.uint8).reshape(count, rows, cols)


def parse_idx_labels(payload: bytes, n_classes: int | None = None) -> np.ndarray:
    """IDX label payload to a (count,) uint8 vector, optionally range-checked."""
    payload = _maybe_gunzip(payload)
    (count,), offset = _read_header(payload, IDX_LABEL_MAGIC, 1)
    body = payload[offset:]
    if len(body) != count:
        raise DataLengthError(
            f"IDX label payload holds {len(body)} bytes, header promises {count}"
        )
    labels = np.frombuffer(body, dtype=np.uint8)
    if n_classes is not None and labels.size and labels.max() >= n_classes:
        raise DomainError(f"label {labels.max()} outside [0, {n_classes})")
    return labels


def load_idx_dataset(
    images_path: str | Path,
    labels_path: str | Path,
    n_classes: int = 10,
    name: str = "mnist",
) -> Dataset:
    """Paired IDX files to a flattened pixel Dataset (values 0-255)."""
    images = parse_idx_images(Path(images_path).read_bytes())
    labels = parse_idx_labels(Path(labels_path).read_bytes(), n_classes=n_classes)
    if images.shape[0] != labels.shape[0]:
        raise DimensionError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    features = images.reshape(images.shape[0], -1).astype(np.float64)
    return Dataset(features, labels.astype(np.int64), class_count=n_classes, name=name)


def load_csv(
    path: str | Path, label_column: str, class_count: int | None = None
) -> Dataset:
    """Numeric CSV with a header row; every non-label column is a feature."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if label_column not in header:
        raise ConfigurationError(f"{path}: no column named {label_column!r}")
    label_idx = header.index(label_column)

    features: list[list[float]] = []
    labels: list[int] = []
    for row_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataFormatError(
                f"{path}:{row_no}: {len(cells)} cells, header has {len(header)}"
            )
        row: list[float] = []
        for col_no, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}:{row_no}: column {header[col_no]!r} "
                    f"holds non-numeric value {cell.strip()!r}"
                ) from None
            if col_no == label_idx:
                if value != int(value):
                    raise ParseError(
                        f"{path}:{row_no}: label {cell.strip()!r} is not integer-coded"
                    )
                labels.append(int(value))
            else:
                row.append(value)
        features.append(row)
    if not features:
        raise DataFormatError(f"{path}: no data rows")
    label_arr = np.asarray(labels, dtype=np.int64)
    inferred = class_count if class_count is not None else int(label_arr.max()) + 1
    return Dataset(
        np.asarray(features, dtype=np.float64),
        label_arr,
        class_count=inferred,
        name=Path(path).stem,
    )


def save_dataset(path: str | Path, dataset: Dataset) -> None:
    """Write one dataset in the binary cache format (little-endian float64)."""
    path = Path(path)
    header = struct.pack(
        "<4sQQQ", CACHE_MAGIC, dataset.n_samples, dataset.n_features, dataset.class_count
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels, dtype="<i8").tobytes())


def load_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    payload = Path(path).read_bytes()
    header_len = struct.calcsize("<4sQQQ")
    if len(payload) < header_len:
        raise DataFormatError(f"{path}: cache header truncated")
    magic, n, d, classes = struct.unpack("<4sQQQ", payload[:header_len])
    if magic != CACHE_MAGIC:
        raise DataFormatError(f"{path}: bad cache magic {magic!r}")
    expected = header_len + 8 * n * d + 8 * n
    if len(payload) != expected:
        raise DataLengthError(f"{path}: cache holds {len(payload)} bytes, expected {expected}")
    features = np.frombuffer(payload, dtype="<f8", count=n * d, offset=header_len)
    labels = np.frombuffer(payload, dtype="<i8", count=n, offset=header_len + 8 * n * d)
    return Dataset(
        features.reshape(n, d).copy(),
        labels.copy(),
        class_count=classes,
        name=name or Path(path).stem,
    )


def save_cache(directory: str | Path, train: Dataset, test: Dataset, manifest: dict) -> Path:
    """Persist a prepared train/test pair plus its provenance manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_dataset(directory / "train.ffd", train)
    save_dataset(directory / "test.ffd", test)
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def load_cache(directory: str | Path) -> tuple[Dataset, Dataset, dict]:
    """Load a prepared cache directory back into (train, test, manifest)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    name = manifest.get("name", directory.name)
    train = load_dataset(directory / "train.ffd", name=f"{name}-train")
    test = load_dataset(directory / "test.ffd", name=f"{name}-test")
    return train, test, manifest
