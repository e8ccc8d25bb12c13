"""Dataset container, CSV ingestion, standardization, splits, and synthetic data.

CSV convention: UTF-8, comma separated, one header row, '.' decimal separator,
numerics unquoted; the protected column (and the optional outcome column)
holds literal 0/1.

All randomness flows through a seeded 64-bit counter-based generator (Philox)
and Gaussians are drawn with an explicit Box-Muller transform, so samples are
reproducible across platforms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import CsvParseError, DegenerateDataError, StratificationError

SYNTH2_GRID = tuple(range(20, 101, 10))
_SYNTH2_BASE_DIM = 1000
_SYNTH2_AR_PARAMS_0 = (0.99, 0.98, 0.97, 0.98, 0.95)
_SYNTH2_AR_PARAMS_1 = (0.99, 0.98, 0.97, 0.98, 0.99)


@dataclass(frozen=True)
class Standardization:
    """Per-feature (mean, std) recorded when a dataset was standardized."""

    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class DataSet:
    """Feature matrix with a binary protected attribute and optional outcome."""

    features: np.ndarray
    protected: np.ndarray
    outcome: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    standardization: Standardization | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        a = np.asarray(self.protected, dtype=int)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if a.shape != (X.shape[0],):
            raise ValueError("protected must be a vector matching the row count")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("protected attribute must be binary 0/1")
        if not (a == 0).any() or not (a == 1).any():
            raise ValueError("both protected groups must be non-empty")
        names = tuple(self.feature_names) or tuple(
            f"x{j}" for j in range(X.shape[1])
        )
        if len(names) != X.shape[1]:
            raise ValueError("feature_names must match the column count")
        y = self.outcome
        if y is not None:
            y = np.asarray(y, dtype=int)
            if y.shape != (X.shape[0],) or not np.isin(y, (0, 1)).all():
                raise ValueError("outcome must be a binary 0/1 vector matching rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "protected", a)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def group_features(self, group: int) -> np.ndarray:
        return self.features[self.protected == group]


@dataclass(frozen=True)
class SplitSpec:
    """Stratified train/test split parameters."""

    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def load_csv(
    path: str | Path,
    protected_column: str,
    outcome_column: str | None = None,
) -> DataSet:
    """Read a dataset, extracting the protected/outcome columns from the features."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: file is empty, expected a header row")
        header = [name.strip() for name in header]
        special = {protected_column} | ({outcome_column} if outcome_column else set())
        for name in special:
            if name not in header:
                raise CsvParseError(f"{path}: column '{name}' not found in header")
        feature_cols = [
            (j, name) for j, name in enumerate(header) if name not in special
        ]
        prot_idx = header.index(protected_column)
        out_idx = header.index(outcome_column) if outcome_column else None

        rows: list[list[float]] = []
        protected: list[int] = []
        outcome: list[int] = []
        for i, record in enumerate(reader, start=2):  # header is line 1
            if len(record) != len(header):
                raise CsvParseError(
                    f"{path}: row {i} has {len(record)} cells, expected {len(header)}"
                )
            values = []
            for j, name in feature_cols:
                try:
                    values.append(float(record[j]))
                except ValueError:
                    raise CsvParseError(
                        f"{path}: row {i}, column '{name}': non-numeric cell {record[j]!r}"
                    )
            rows.append(values)
            protected.append(
                _parse_binary(record[prot_idx], path, i, protected_column)
            )
            if out_idx is not None:
                outcome.append(_parse_binary(record[out_idx], path, i, outcome_column))

    return DataSet(
        features=np.array(rows, dtype=float),
        protected=np.array(protected, dtype=int),
        outcome=np.array(outcome, dtype=int) if out_idx is not None else None,
        feature_names=tuple(name for _, name in feature_cols),
    )


def write_csv(
    ds: DataSet,
    path: str | Path,
    protected_column: str = "protected",
    outcome_column: str = "outcome",
) -> None:
    """Write a dataset; floats use repr so load_csv round-trips exactly."""
    path = Path(path)
    header = list(ds.feature_names) + [protected_column]
    if ds.outcome is not None:
        header.append(outcome_column)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n_samples):
            row = [repr(float(v)) for v in ds.features[i]]
            row.append(str(int(ds.protected[i])))
            if ds.outcome is not None:
                row.append(str(int(ds.outcome[i])))
            writer.writerow(row)


def _parse_binary(cell: str, path: Path, row: int, column: str) -> int:
    cell = cell.strip()
    if cell not in ("0", "1"):
        raise CsvParseError(
            f"{path}: row {row}, column '{column}': expected literal 0 or 1, got {cell!r}"
        )
    return int(cell)


def standardize(ds: DataSet) -> DataSet:
    """Z-score each feature column; the (mean, std) pair is recorded.

    Uses the sample standard deviation (1/(n-1)), matching the covariance
    convention, so the fit set ends up with sample std exactly 1.
    """
    X = ds.features
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    floor = 1e-15 * np.maximum(1.0, np.abs(mean))
    dead = np.flatnonzero(std <= floor)
    if dead.size:
        raise DegenerateDataError(
            f"constant feature column '{ds.feature_names[dead[0]]}' cannot be standardized"
        )
    params = Standardization(mean=mean, std=std)
    return replace(ds, features=(X - mean) / std, standardization=params)


def apply_standardization(ds: DataSet, params: Standardization) -> DataSet:
    """Apply previously fitted standardization parameters (e.g. train → test)."""
    return replace(
        ds, features=(ds.features - params.mean) / params.std, standardization=params
    )


def split(ds: DataSet, spec: SplitSpec) -> tuple[DataSet, DataSet]:
    """Deterministic stratified train/test split.

    The total train size is round(frac·n); it is allocated to the protected
    groups by largest remainder so group proportions are preserved within
    one sample.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    n = ds.n_samples
    n_train = int(np.floor(spec.train_fraction * n + 0.5))

    group_idx = [np.flatnonzero(ds.protected == g) for g in (0, 1)]
    exact = [spec.train_fraction * idx.size for idx in group_idx]
    counts = [int(np.floor(e)) for e in exact]
    leftovers = n_train - sum(counts)
    order = sorted((0, 1), key=lambda g: exact[g] - counts[g], reverse=True)
    for g in order[:leftovers]:
        counts[g] += 1

    train_parts, test_parts = [], []
    for g in (0, 1):
        idx = group_idx[g]
        if not 0 < counts[g] < idx.size:
            raise StratificationError(
                f"group {g} would be empty in train or test "
                f"(size {idx.size}, train take {counts[g]})"
            )
        perm = rng.permutation(idx)
        train_parts.append(perm[: counts[g]])
        test_parts.append(perm[counts[g] :])

    def take(indices: np.ndarray) -> DataSet:
        indices = np.sort(indices)
        return DataSet(
            features=ds.features[indices],
            protected=ds.protected[indices],
            outcome=None if ds.outcome is None else ds.outcome[indices],
            feature_names=ds.feature_names,
            standardization=None,
        )

    return take(np.concatenate(train_parts)), take(np.concatenate(test_parts))


def standard_normals(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Standard normals via Box-Muller on uniforms from the given generator."""
    count = int(np.prod(shape))
    half = (count + 1) // 2
    u1 = 1.0 - rng.random(half)  # in (0, 1], log-safe
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:count].reshape(shape)


def _gaussian_sample(
    rng: np.random.Generator, mean: np.ndarray, chol_lower: np.ndarray, n: int
) -> np.ndarray:
    z = standard_normals(rng, (n, chol_lower.shape[0]))
    return mean + z @ chol_lower.T


def synth1(seed: int) -> DataSet:
    """Two 3-D groups of 150 samples with equal mean and covariance.

    Group 0 is N(0, 0.1 I + 11'); group 1 is a balanced mixture of
    N(±1, 0.1 I).  Only the distributions differ, which is exactly the case
    moment-matching fairness constraints cannot see.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    n = 150
    cov0 = 0.1 * np.eye(3) + np.ones((3, 3))
    g0 = _gaussian_sample(rng, np.zeros(3), np.linalg.cholesky(cov0), n)
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    g1 = signs[:, None] * np.ones(3) + np.sqrt(0.1) * standard_normals(rng, (n, 3))
    return DataSet(
        features=np.vstack([g0, g1]),
        protected=np.concatenate([np.zeros(n, dtype=int), np.ones(n, dtype=int)]),
        feature_names=("x0", "x1", "x2"),
    )


def ar1_covariance(size: int, r: float) -> np.ndarray:
    """AR(1) process covariance: entry (i, j) = r^|i-j| / (1 - r²)."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"AR parameter must lie in (0, 1), got {r}")
    idx = np.arange(size)
    return r ** np.abs(idx[:, None] - idx[None, :]) / (1.0 - r * r)


def synth2_base_distributions() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(mu0, mu1, sigma0, sigma1) of the 1000-dimensional base Gaussians.

    The mean difference has norm exactly 2; the covariances are block
    diagonal with AR(1) blocks, jointly rescaled so their difference has
    spectral norm exactly 1.
    """
    p0 = _SYNTH2_BASE_DIM
    block = p0 // 5
    sigma0_raw = _block_diag([ar1_covariance(block, r) for r in _SYNTH2_AR_PARAMS_0])
    sigma1_raw = _block_diag([ar1_covariance(block, r) for r in _SYNTH2_AR_PARAMS_1])
    q_raw = sigma1_raw - sigma0_raw
    q_norm = float(np.abs(np.linalg.eigvalsh(q_raw)).max())

    f_raw = np.ones(p0)
    f = 2.0 * f_raw / np.linalg.norm(f_raw)
    mu0 = np.zeros(p0)
    return mu0, mu0 + f, sigma0_raw / q_norm, sigma1_raw / q_norm


def synth2(p: int, seed: int, n_per_group: int = 250) -> DataSet:
    """Two p-dimensional groups obtained by randomly projecting a fixed
    1000-dimensional pair of Gaussians.

    In the base dimension the mean difference has norm 2 and the covariance
    difference (block-diagonal AR(1) structure) has spectral norm 1, the
    covariances themselves being rescaled by the same factor as their
    difference.  Samples, not covariances, are projected: the projection is
    a 1000×p matrix of i.i.d. N(0, 1/1000) entries shared by both groups,
    so the projected data stays O(1) for every p.
    """
    if p not in SYNTH2_GRID:
        raise ValueError(
            f"p must be one of {list(SYNTH2_GRID)} (multiples of 10 in [20, 100]), got {p}"
        )
    if n_per_group < 2:
        raise ValueError("need at least two samples per group")

    p0 = _SYNTH2_BASE_DIM
    mu0, mu1, sigma0, sigma1 = synth2_base_distributions()

    rng = np.random.Generator(np.random.Philox(seed))
    g0 = _gaussian_sample(rng, mu0, np.linalg.cholesky(sigma0), n_per_group)
    g1 = _gaussian_sample(rng, mu1, np.linalg.cholesky(sigma1), n_per_group)
    projection = standard_normals(rng, (p0, p)) / np.sqrt(p0)

    return DataSet(
        features=np.vstack([g0 @ projection, g1 @ projection]),
        protected=np.concatenate(
            [np.zeros(n_per_group, dtype=int), np.ones(n_per_group, dtype=int)]
        ),
        feature_names=tuple(f"x{j}" for j in range(p)),
    )


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    offset = 0
    for b in blocks:
        k = b.shape[0]
        out[offset : offset + k, offset : offset + k] = b
        offset += k
    return out
