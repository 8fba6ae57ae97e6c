"""Dataset, embedding and divergence containers, file I/O and synthetic data.

Class indices are 1-based everywhere in the Python API (``1..C``). Files on
disk store 0-based indices; the conversion happens only in the loaders and
writers of this module.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateEmbeddingError,
    DimensionMismatchError,
    InvalidPathMatrixError,
    LoadError,
    ValidationError,
)

__all__ = [
    "Dataset",
    "LabelEmbeddings",
    "ClassSplit",
    "DivergenceMatrix",
    "SyntheticSpec",
    "cosine_divergence",
    "path_divergence",
    "generate_synthetic",
    "validation_split",
    "save_dataset",
    "load_dataset",
    "save_samples",
    "load_samples",
]

FLOAT_FMT = "%.17g"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples ``features`` (N x m) with 1-based integer ``labels``."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty 2-D array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValidationError(f"labels must have length {X.shape[0]}, got shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain non-finite values")
        if y.dtype.kind not in "iu":
            if not np.all(np.mod(y, 1) == 0):
                raise ValidationError("labels must be integers")
        y = y.astype(np.int64)
        if np.any(y < 1):
            raise ValidationError("labels are 1-based class indices and must be >= 1")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y, np.int64))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx])

    def check_labels(self, allowed, what="class set"):
        bad = ~np.isin(self.labels, np.asarray(list(allowed)))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"sample {i} has label {self.labels[i]} outside the {what}"
            )


@dataclass(frozen=True, eq=False)
class LabelEmbeddings:
    """Class embedding matrix, one row per class (row ``r - 1`` embeds class ``r``)."""

    matrix: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.matrix, dtype=float)
        if E.ndim != 2 or E.shape[1] < 1:
            raise ValidationError(f"embeddings must be a 2-D array, got shape {E.shape}")
        if E.shape[0] < 2:
            raise ValidationError("at least two classes are required")
        if not np.all(np.isfinite(E)):
            raise ValidationError("embeddings contain non-finite values")
        zero = np.flatnonzero(~np.any(E != 0, axis=1))
        if zero.size:
            raise ValidationError(f"embedding of class {zero[0] + 1} is all zeros")
        object.__setattr__(self, "matrix", _frozen(E))

    @property
    def class_count(self) -> int:
        return self.matrix.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.matrix.shape[1]

    def __getitem__(self, r):
        return self.matrix[r - 1]


@dataclass(frozen=True)
class ClassSplit:
    """Seen/unseen partition of the classes ``1..C`` plus the validation policy.

    ``val_mode="samples"`` holds out a stratified fraction of every seen class;
    ``val_mode="classes"`` holds out whole seen classes.
    """

    seen: tuple
    unseen: tuple
    val_fraction: float = 0.2
    val_mode: str = "samples"

    def __post_init__(self):
        seen = tuple(sorted(int(c) for c in self.seen))
        unseen = tuple(sorted(int(c) for c in self.unseen))
        if not seen or not unseen:
            raise ValidationError("seen and unseen class sets must both be nonempty")
        if len(set(seen)) != len(seen) or len(set(unseen)) != len(unseen):
            raise ValidationError("duplicate class index in split")
        if set(seen) & set(unseen):
            raise ValidationError("seen and unseen class sets overlap")
        n = len(seen) + len(unseen)
        if set(seen) | set(unseen) != set(range(1, n + 1)):
            raise ValidationError(f"seen and unseen must cover exactly 1..{n}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must lie in [0, 1)")
        if self.val_mode not in ("samples", "classes"):
            raise ValidationError(f"unknown val_mode {self.val_mode!r}")
        object.__setattr__(self, "seen", seen)
        object.__setattr__(self, "unseen", unseen)

    @property
    def n_classes(self) -> int:
        return len(self.seen) + len(self.unseen)


@dataclass(frozen=True, eq=False)
class DivergenceMatrix:
    """Symmetric C x C semantic divergence with zero diagonal and entries in [0, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.matrix, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValidationError(f"divergence matrix must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise ValidationError("divergence matrix contains non-finite values")
        bad = np.argwhere((D < 0) | (D > 1))
        if bad.size:
            i, j = bad[0]
            raise ValidationError(f"divergence entry ({i}, {j}) = {D[i, j]} outside [0, 1]")
        if np.any(np.diag(D) != 0):
            raise ValidationError("divergence diagonal must be exactly 0")
        if not np.allclose(D, D.T, rtol=0, atol=1e-12):
            raise ValidationError("divergence matrix must be symmetric")
        object.__setattr__(self, "matrix", _frozen(D))

    @property
    def class_count(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, y1, y2):
        return self.matrix[y1 - 1, y2 - 1]


def cosine_divergence(embeddings: LabelEmbeddings) -> DivergenceMatrix:
    """Divergence ``(1 - cos) / (1 - min cos)`` between label embeddings.

    The maximum entry is exactly 1, attained at the least similar pair.
    """
    E = embeddings.matrix
    unit = E / np.linalg.norm(E, axis=1, keepdims=True)
    # 1 - cos(a, b) = |a - b|^2 / 2 for unit vectors; exact 0 for equal directions
    diff = unit[:, None, :] - unit[None, :, :]
    gap = np.clip(0.5 * np.einsum("abk,abk->ab", diff, diff), 0.0, 2.0)
    denom = gap.max()
    if denom <= 1e-12:
        raise DegenerateEmbeddingError(
            "all label embeddings are parallel; cosine divergence is undefined"
        )
    D = gap / denom
    np.fill_diagonal(D, 0.0)
    return DivergenceMatrix(D)


def path_divergence(spath) -> DivergenceMatrix:
    """Divergence ``1 - 1/(path + 1)`` from a matrix of shortest-path lengths."""
    P = np.asarray(spath)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidPathMatrixError(f"path matrix must be square, got shape {P.shape}")
    Pf = P.astype(float)
    if not np.all(np.isfinite(Pf)) or np.any(Pf != np.round(Pf)):
        raise InvalidPathMatrixError("path lengths must be integers")
    if np.any(Pf < 0):
        raise InvalidPathMatrixError("path lengths must be non-negative")
    if np.any(Pf != Pf.T):
        raise InvalidPathMatrixError("path matrix must be symmetric")
    if np.any(np.diag(Pf) != 0):
        raise InvalidPathMatrixError("path matrix must have a zero diagonal")
    return DivergenceMatrix(1.0 - 1.0 / (Pf + 1.0))


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 15
    n_seen: int = 10
    embed_dim: int = 16
    feature_dim: int = 16
    samples_per_class: int = 60
    noise_scale: float = 1.0

    def __post_init__(self):
        if not 2 <= self.n_seen < self.n_classes:
            raise ValidationError(
                f"need 2 <= n_seen < n_classes, got n_seen={self.n_seen}, n_classes={self.n_classes}"
            )
        for name in ("embed_dim", "feature_dim", "samples_per_class"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not self.noise_scale >= 0:
            raise ValidationError("noise_scale must be non-negative")


def generate_synthetic(spec: SyntheticSpec, seed: int):
    """Draw a zero-shot problem with a linear feature map.

    Class embeddings are uniform on the unit sphere. A fixed random matrix
    ``A`` (m x d) maps each embedding to feature space and isotropic gaussian
    noise of scale ``spec.noise_scale`` is added. Classes ``1..n_seen`` are
    seen (training samples only), the rest unseen (test samples only).

    Returns
    -------
    train, test : Dataset
    embeddings : LabelEmbeddings
    split : ClassSplit
    """
    rng = np.random.default_rng(seed)
    C, d, m = spec.n_classes, spec.embed_dim, spec.feature_dim
    phi = rng.standard_normal((C, d))
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    A = rng.standard_normal((m, d))

    def draw(classes):
        y = np.repeat(np.asarray(classes), spec.samples_per_class)
        X = phi[y - 1] @ A.T
        X = X + spec.noise_scale * rng.standard_normal(X.shape)
        return Dataset(X, y)

    seen = range(1, spec.n_seen + 1)
    unseen = range(spec.n_seen + 1, C + 1)
    train = draw(seen)
    test = draw(unseen)
    return train, test, LabelEmbeddings(phi), ClassSplit(tuple(seen), tuple(unseen))


def validation_split(data: Dataset, split: ClassSplit, seed: int):
    """Partition seen-class samples into fitting and validation parts.

    Returns ``(fit, val, fit_classes, val_classes)``; in ``"samples"`` mode the
    two class tuples are both ``split.seen``. ``val`` is None when
    ``val_fraction`` is 0.
    """
    data.check_labels(split.seen, "seen classes")
    rng = np.random.default_rng(seed)
    if split.val_fraction == 0:
        return data, None, split.seen, split.seen
    if split.val_mode == "classes":
        n_val = max(1, int(round(split.val_fraction * len(split.seen))))
        if n_val >= len(split.seen):
            raise ValidationError("class-level holdout leaves no seen class to train on")
        val_classes = tuple(sorted(int(c) for c in rng.choice(split.seen, n_val, replace=False)))
        fit_classes = tuple(c for c in split.seen if c not in val_classes)
        val_mask = np.isin(data.labels, val_classes)
    else:
        val_mask = np.zeros(data.n_samples, dtype=bool)
        for c in split.seen:
            idx = np.flatnonzero(data.labels == c)
            if idx.size < 2:
                continue
            n_val = min(idx.size - 1, max(1, int(round(split.val_fraction * idx.size))))
            val_mask[rng.permutation(idx)[:n_val]] = True
        fit_classes = val_classes = split.seen
    if not val_mask.any():
        raise ValidationError("validation partition is empty")
    fit_idx = np.flatnonzero(~val_mask)
    val_idx = np.flatnonzero(val_mask)
    return data.subset(fit_idx), data.subset(val_idx), fit_classes, val_classes


# ---------------------------------------------------------------------------
# file I/O


def _read_rows(path: Path, ncols=None):
    if not path.exists():
        raise LoadError("file not found", path)
    rows = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if ncols is not None and len(cells) != ncols:
                raise DimensionMismatchError(
                    f"expected {ncols} values, found {len(cells)}", path, i
                )
            try:
                vals = [float(c) for c in cells]
            except ValueError as exc:
                raise LoadError(f"cannot parse number ({exc})", path, i) from None
            bad = [j for j, v in enumerate(vals) if not math.isfinite(v)]
            if bad:
                raise LoadError("non-finite value", path, i, bad[0])
            rows.append(vals)
    if not rows:
        raise LoadError("file is empty", path)
    return rows


def _write_matrix(path: Path, M):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt=FLOAT_FMT)


def _read_header(directory: Path):
    path = directory / "header.json"
    if not path.exists():
        raise LoadError("file not found", path)
    with open(path) as fh:
        return json.load(fh)


def save_samples(directory, data: Dataset):
    """Write ``features.csv`` and ``labels.csv`` (0-based labels)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "features.csv", data.features)
    np.savetxt(directory / "labels.csv", data.labels - 1, fmt="%d")


def load_samples(directory, n_classes: int, allowed=None, feature_dim=None) -> Dataset:
    """Read ``features.csv``/``labels.csv`` from ``directory``.

    ``allowed`` restricts labels (1-based) to a class subset.
    """
    directory = Path(directory)
    fpath, lpath = directory / "features.csv", directory / "labels.csv"
    X = _read_rows(fpath, feature_dim)
    ncols = len(X[0])
    for i, row in enumerate(X):
        if len(row) != ncols:
            raise DimensionMismatchError(f"expected {ncols} values, found {len(row)}", fpath, i)
    y = _read_rows(lpath, 1)
    if len(y) != len(X):
        raise DimensionMismatchError(
            f"{len(y)} labels for {len(X)} feature rows", lpath
        )
    labels = np.empty(len(y), dtype=np.int64)
    allowed = None if allowed is None else set(allowed)
    for i, (v,) in enumerate(y):
        if v != int(v):
            raise LoadError(f"label {v} is not an integer", lpath, i)
        c = int(v) + 1
        if not 1 <= c <= n_classes or (allowed is not None and c not in allowed):
            raise LoadError(f"label {int(v)} out of range", lpath, i)
        labels[i] = c
    return Dataset(np.array(X), labels)


def save_dataset(directory, data: Dataset, embeddings: LabelEmbeddings, split: ClassSplit,
                 delta: DivergenceMatrix | None = None):
    """Write a training dataset directory.

    Files: ``header.json``, ``features.csv``, ``labels.csv``,
    ``embeddings.csv``, ``split.json`` and optionally ``delta.csv``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "index_base": 0,
        "n_samples": data.n_samples,
        "feature_dim": data.feature_dim,
        "n_classes": embeddings.class_count,
        "embed_dim": embeddings.embed_dim,
    }
    with open(directory / "header.json", "w") as fh:
        json.dump(header, fh, indent=2)
    save_samples(directory, data)
    _write_matrix(directory / "embeddings.csv", embeddings.matrix)
    doc = {
        "seen": [c - 1 for c in split.seen],
        "unseen": [c - 1 for c in split.unseen],
        "val_fraction": split.val_fraction,
        "val_mode": split.val_mode,
    }
    with open(directory / "split.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    if delta is not None:
        _write_matrix(directory / "delta.csv", delta.matrix)


def _load_split(path: Path, n_classes: int) -> ClassSplit:
    if not path.exists():
        raise LoadError("file not found", path)
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("seen", "unseen"):
        if key not in doc:
            raise LoadError(f"missing key {key!r}", path)
        for c in doc[key]:
            if not isinstance(c, int) or not 0 <= c < n_classes:
                raise LoadError(f"class index {c!r} in {key!r} out of range", path)
    try:
        return ClassSplit(
            tuple(c + 1 for c in doc["seen"]),
            tuple(c + 1 for c in doc["unseen"]),
            float(doc.get("val_fraction", 0.2)),
            doc.get("val_mode", "samples"),
        )
    except ValidationError as exc:
        raise LoadError(str(exc), path) from None


def load_dataset(directory):
    """Load a dataset directory written by :func:`save_dataset`.

    Returns
    -------
    data : Dataset
    embeddings : LabelEmbeddings
    split : ClassSplit
    delta : DivergenceMatrix or None
    """
    directory = Path(directory)
    header = _read_header(directory)
    C, d, m = header["n_classes"], header["embed_dim"], header["feature_dim"]

    epath = directory / "embeddings.csv"
    rows = _read_rows(epath, d)
    if len(rows) != C:
        raise DimensionMismatchError(f"expected {C} embedding rows, found {len(rows)}", epath)
    try:
        embeddings = LabelEmbeddings(np.array(rows))
    except ValidationError as exc:
        raise LoadError(str(exc), epath) from None

    split = _load_split(directory / "split.json", C)
    data = load_samples(directory, C, allowed=split.seen, feature_dim=m)
    if data.n_samples != header.get("n_samples", data.n_samples):
        raise DimensionMismatchError(
            f"header declares {header['n_samples']} samples, found {data.n_samples}",
            directory / "features.csv",
        )

    delta = None
    dpath = directory / "delta.csv"
    if dpath.exists():
        D = np.array(_read_rows(dpath, C))
        if D.shape[0] != C:
            raise DimensionMismatchError(f"expected {C} rows, found {D.shape[0]}", dpath)
        bad = np.argwhere((D < 0) | (D > 1))
        if bad.size:
            i, j = bad[0]
            raise LoadError(f"divergence {D[i, j]} outside [0, 1]", dpath, int(i), int(j))
        try:
            delta = DivergenceMatrix(D)
        except ValidationError as exc:
            raise LoadError(str(exc), dpath) from None
    return data, embeddings, split, delta
