"""
LibSVM text format: ``label idx:val idx:val ...`` with 1-based indices.

Files are read one line at a time; indices are shifted to 0-based at this
boundary and labels {0, 1} or {-1, +1} are normalized to {-1, +1}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Optional, TextIO, Tuple, Union

import numpy as np

from geometry.vecmath import Vector

logger = logging.getLogger(__name__)

# ℓ₁ radius per dataset for the hinge experiments
DATASET_TAU = {
    "covtype": 50.0,
    "realsim": 60.0,
    "a9a": 20.0,
    "w8a": 30.0,
    "ijcnn1": 10.0,
    "rcv1": 80.0,
}

_POSITIVE_LABELS = {"1", "+1", "1.0", "+1.0"}
_NEGATIVE_LABELS = {"0", "-1", "0.0", "-1.0"}


class LibSVMParseError(ValueError):
    """Malformed LibSVM input; carries the 1-based line number and offending token."""

    def __init__(self, line_number: int, token: str, reason: str):
        self.line_number = line_number
        self.token = token
        super().__init__(f"line {line_number}: {reason} (token {token!r})")


@dataclass
class Dataset:
    """Labelled sparse samples; ``dimension`` is one past the largest feature index."""

    samples: List[Tuple[Vector, float]]
    dimension: int
    name: str = "dataset"

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def positives(self) -> int:
        return sum(1 for _, label in self.samples if label > 0)


def _parse_label(token: str, line_number: int) -> float:
    if token in _POSITIVE_LABELS:
        return 1.0
    if token in _NEGATIVE_LABELS:
        return -1.0
    raise LibSVMParseError(line_number, token, "label must be one of 0, 1, -1, +1")


def _parse_feature(token: str, line_number: int, last_index: int) -> Tuple[int, float]:
    index_text, sep, value_text = token.partition(":")
    if not sep:
        raise LibSVMParseError(line_number, token, "feature must be idx:val")
    try:
        index = int(index_text)
        value = float(value_text)
    except ValueError:
        raise LibSVMParseError(line_number, token, "non-numeric feature") from None
    if not np.isfinite(value):
        raise LibSVMParseError(line_number, token, "feature value must be finite")
    if index <= 0:
        raise LibSVMParseError(line_number, token, "feature index must be positive")
    if index <= last_index:
        raise LibSVMParseError(line_number, token, "feature indices must increase within a line")
    return index, value


def parse_libsvm(stream: Iterable[str], name: str = "dataset") -> Dataset:
    """
    Parse LibSVM lines into a Dataset.

    Blank lines are skipped and ``#`` starts a comment.

    Args:
        stream: Any iterable of text lines (an open file, a list, ...)
        name: Dataset name kept for reports

    Raises:
        LibSVMParseError: On the first malformed line
    """
    parsed = []
    max_index = 0
    for line_number, raw in enumerate(stream, start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        tokens = content.split()
        label = _parse_label(tokens[0], line_number)
        indices, values = [], []
        last_index = 0
        for token in tokens[1:]:
            index, value = _parse_feature(token, line_number, last_index)
            indices.append(index - 1)
            values.append(value)
            last_index = index
        max_index = max(max_index, last_index)
        parsed.append((indices, values, label))

    # A file without any feature still gets a one-dimensional space
    dimension = max(max_index, 1)
    samples = [
        (Vector(dimension=dimension, values=np.asarray(values, dtype=np.float64),
                indices=np.asarray(indices, dtype=np.int64)), label)
        for indices, values, label in parsed
    ]
    logger.info("Parsed %s: %d samples, dimension %d", name, len(samples), dimension)
    return Dataset(samples=samples, dimension=dimension, name=name)


def _decoded_lines(handle: BinaryIO) -> Iterator[str]:
    for line_number, raw in enumerate(handle, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LibSVMParseError(
                line_number, raw[exc.start:exc.end].hex(), "invalid UTF-8"
            ) from None


def load_libsvm(path: Union[str, Path]) -> Dataset:
    """Bytes are decoded line by line so an encoding error keeps its line number."""
    path = Path(path)
    with path.open("rb") as handle:
        return parse_libsvm(_decoded_lines(handle), name=path.stem)


def tau_for(path: Union[str, Path]) -> Optional[float]:
    """Preset ℓ₁ radius when the file stem names a known dataset."""
    stem = Path(path).stem.lower().replace("-", "").replace("_", "")
    return DATASET_TAU.get(stem)


def write_libsvm(dataset: Dataset, stream: TextIO) -> int:
    """Write samples with 1-based indices and ±1 labels; returns the line count."""
    for features, label in dataset.samples:
        if features.is_sparse:
            pairs = zip(features.indices.tolist(), features.values.tolist())
        else:
            nonzero = np.nonzero(features.values)[0]
            pairs = zip(nonzero.tolist(), features.values[nonzero].tolist())
        body = " ".join(f"{index + 1}:{value!r}" for index, value in pairs)
        head = "+1" if label > 0 else "-1"
        stream.write(f"{head} {body}\n" if body else f"{head}\n")
    return len(dataset.samples)


def make_synthetic_dataset(
    n: int,
    d: int,
    density: float = 0.05,
    seed: int = 0,
    noise: float = 0.05,
) -> Dataset:
    """
    Sparse linearly separable data with a fraction ``noise`` of flipped labels.

    Each row holds about ``density · d`` nonzero features drawn from N(0, 1);
    labels follow the sign of a sparse planted separator.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if not 0.0 <= noise < 0.5:
        raise ValueError(f"noise must be in [0, 0.5), got {noise}")

    rng = np.random.default_rng(seed)
    support = rng.choice(d, size=max(1, d // 10), replace=False)
    separator = np.zeros(d)
    separator[support] = rng.standard_normal(support.size)
    per_row = max(1, int(round(density * d)))

    samples = []
    for _ in range(n):
        indices = np.sort(rng.choice(d, size=per_row, replace=False))
        values = np.round(rng.standard_normal(per_row), 6)
        score = float(values @ separator[indices])
        label = 1.0 if score >= 0.0 else -1.0
        if rng.uniform() < noise:
            label = -label
        samples.append((Vector(dimension=d, values=values, indices=indices), label))
    return Dataset(samples=samples, dimension=d, name=f"synthetic-{n}x{d}")
