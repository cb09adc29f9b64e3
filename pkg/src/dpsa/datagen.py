"""Synthetic covariance/data generation, file ingestion, and node partitioning.

Conventions: a data matrix is d-by-n (row = feature, column = sample) and
is assumed column-centered.  Per-node covariances are unnormalized Gram
matrices ``M_i = X_i X_i^T`` so that their plain sum equals ``X X^T``
exactly; the constant scaling does not move the eigenspace.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    InvalidSpec,
    NotPSD,
    ParseError,
    RaggedRows,
    ShapeMismatch,
    TooFewItems,
)
from .validation import check_matrix, check_symmetric

SAMPLE_WISE = "samples"
FEATURE_WISE = "features"

DISTINCT_GEOMETRIC = "distinct-geometric"
EQUAL_TOP_R = "equal-top-r"

# Ratio between consecutive eigenvalues inside the top-r block of the
# distinct-geometric profile; the gap parameter only controls the r-th step.
TOP_RATIO = 0.9

BINARY_MAGIC = b"DPSA"


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalue layout for a synthetic covariance matrix.

    ``gap`` is the target ratio lambda_{r+1}/lambda_r in (0, 1);
    ``tail_ratio`` is the geometric decay applied below index r+1.
    """

    d: int
    r: int
    gap: float
    top_profile: str = DISTINCT_GEOMETRIC
    tail_ratio: float = 0.9

    def __post_init__(self):
        if self.d < 2:
            raise InvalidSpec(f"d must be >= 2, got {self.d}")
        if not 1 <= self.r < self.d:
            raise InvalidSpec(f"r must satisfy 1 <= r < d, got r={self.r}, d={self.d}")
        if not 0.0 < self.gap < 1.0:
            raise InvalidSpec(f"gap must lie in (0, 1), got {self.gap}")
        if not 0.0 < self.tail_ratio <= 1.0:
            raise InvalidSpec(f"tail_ratio must lie in (0, 1], got {self.tail_ratio}")
        if self.top_profile not in (DISTINCT_GEOMETRIC, EQUAL_TOP_R):
            raise InvalidSpec(f"unknown top_profile {self.top_profile!r}")

    def eigenvalues(self) -> np.ndarray:
        """Full descending eigenvalue vector realizing the spec exactly."""
        lam = np.empty(self.d)
        if self.top_profile == DISTINCT_GEOMETRIC:
            lam[: self.r] = TOP_RATIO ** np.arange(self.r)
        else:
            lam[: self.r] = 1.0
        lam[self.r] = self.gap * lam[self.r - 1]
        tail = self.d - self.r - 1
        if tail > 0:
            lam[self.r + 1:] = lam[self.r] * self.tail_ratio ** np.arange(1, tail + 1)
        return lam


def make_covariance(spec: SpectrumSpec, seed) -> tuple[np.ndarray, np.ndarray]:
    """Covariance with the requested spectrum and its top-r eigenbasis.

    The eigenvector matrix is the QR factor of a seeded Gaussian matrix,
    so the output is bitwise reproducible per seed.
    """
    lam = spec.eigenvalues()
    u = linalg.random_orthonormal(spec.d, spec.d, seed)
    m = (u * lam) @ u.T
    m = 0.5 * (m + m.T)
    return m, u[:, : spec.r].copy()


def sample_gaussian(m, n: int, seed) -> np.ndarray:
    """n i.i.d. zero-mean Gaussian columns with covariance ``m`` (d-by-n)."""
    m = check_symmetric(m, 1e-10, "m")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    lam, u = linalg.sym_eig(m)
    top = max(lam[0], 0.0)
    if lam[-1] < -1e-10 * max(top, 1.0):
        raise NotPSD(f"smallest eigenvalue {lam[-1]:.3e} is significantly negative")
    root = (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.T
    g = np.random.default_rng(seed).standard_normal((m.shape[0], n))
    return root @ g


def center_columns(x) -> np.ndarray:
    """Subtract each row's mean over columns (per-feature centering)."""
    x = check_matrix(x, "x")
    return x - x.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class PartitionedDataset:
    """Global d-by-n data split across nodes by samples or by features."""

    mode: str
    shards: tuple[np.ndarray, ...]
    global_dims: tuple[int, int]
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in (SAMPLE_WISE, FEATURE_WISE):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        d, n = self.global_dims
        if self.mode == SAMPLE_WISE:
            if any(s.shape[0] != d for s in self.shards):
                raise ShapeMismatch("sample-wise shards must share row count d")
            if sum(s.shape[1] for s in self.shards) != n:
                raise ShapeMismatch("sample-wise shard columns must sum to n")
        else:
            if any(s.shape[1] != n for s in self.shards):
                raise ShapeMismatch("feature-wise shards must share column count n")
            if sum(s.shape[0] for s in self.shards) != d:
                raise ShapeMismatch("feature-wise shard rows must sum to d")

    @property
    def n_nodes(self) -> int:
        return len(self.shards)

    def stack(self) -> np.ndarray:
        """Reassemble the global data matrix in node order."""
        axis = 1 if self.mode == SAMPLE_WISE else 0
        return np.concatenate(self.shards, axis=axis)

    def local_covariances(self) -> list[np.ndarray]:
        """Unnormalized per-node Grams ``X_i X_i^T`` (sample-wise only)."""
        if self.mode != SAMPLE_WISE:
            raise ValueError("local covariances are defined for sample-wise partitions")
        return [s @ s.T for s in self.shards]


def _split_sizes(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + 1 if i < rem else base for i in range(parts)]


def partition(x, mode: str, n_nodes: int, seed: int | None = None,
              shuffle: bool = False) -> PartitionedDataset:
    """Near-even contiguous split of ``x`` into per-node shards.

    Shard sizes are floor(total/N) with the first (total mod N) shards one
    larger; concatenating shards in node order reconstructs the input.
    ``shuffle`` applies a seeded permutation of columns/rows first.
    """
    x = check_matrix(x, "x")
    if n_nodes < 1:
        raise ValueError(f"n_nodes must be >= 1, got {n_nodes}")
    d, n = x.shape
    total = n if mode == SAMPLE_WISE else d
    if mode not in (SAMPLE_WISE, FEATURE_WISE):
        raise ValueError(f"unknown partition mode {mode!r}")
    if total < n_nodes:
        raise TooFewItems(
            f"cannot split {total} items across {n_nodes} nodes"
        )
    if shuffle:
        perm = np.random.default_rng(seed).permutation(total)
        x = x[:, perm] if mode == SAMPLE_WISE else x[perm, :]
    sizes = _split_sizes(total, n_nodes)
    bounds = np.cumsum([0] + sizes)
    if mode == SAMPLE_WISE:
        shards = tuple(x[:, bounds[i]:bounds[i + 1]].copy() for i in range(n_nodes))
    else:
        shards = tuple(x[bounds[i]:bounds[i + 1], :].copy() for i in range(n_nodes))
    return PartitionedDataset(mode, shards, (d, n), seed)


def save_csv(m, path) -> None:
    """Write a matrix as CSV, one row per line, 17 significant digits."""
    m = check_matrix(m, "m")
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV (row = feature, column = sample).

    A single leading header row is skipped automatically when its cells do
    not all parse as numbers.
    """
    rows: list[list[float]] = []
    width: int | None = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped == "":
                continue
            cells = [c.strip() for c in stripped.split(",")]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"{path}: non-numeric cell at line {lineno}") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise RaggedRows(
                    f"{path}: line {lineno} has {len(values)} cells, expected {width}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no numeric rows")
    return np.asarray(rows, dtype=np.float64)


def save_binary(m, path) -> None:
    """Write the companion binary format: magic, u32 rows, u32 cols, f64 row-major."""
    m = check_matrix(m, "m")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def load_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        rows, cols = struct.unpack("<II", fh.read(8))
        payload = fh.read(8 * rows * cols)
        if len(payload) != 8 * rows * cols:
            raise ParseError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
