"""MovieLens rating ingestion, dense re-indexing and train/test splitting.

Ratings are held column-wise in numpy arrays; :class:`RatingRecord` objects
are produced on demand for callers that want row-wise access.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDataset, IndexMissing, MalformedLine


@dataclass(frozen=True)
class RatingRecord:
    user_id: int
    item_id: int
    rating: float
    timestamp: int


@dataclass(frozen=True)
class DatasetMeta:
    """Index maps and rating bounds shared by every split of one dataset."""

    user_index: Mapping[int, int]
    item_index: Mapping[int, int]
    scale_min: float
    scale_max: float

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    @classmethod
    def from_ids(cls, user_ids, item_ids, scale_min, scale_max):
        users = np.unique(np.asarray(user_ids, dtype=np.int64))
        items = np.unique(np.asarray(item_ids, dtype=np.int64))
        return cls(
            MappingProxyType({int(u): k for k, u in enumerate(users)}),
            MappingProxyType({int(i): k for k, i in enumerate(items)}),
            float(scale_min),
            float(scale_max),
        )

    def user_ids(self) -> np.ndarray:
        """External user IDs ordered by dense index."""
        return np.fromiter(self.user_index.keys(), dtype=np.int64, count=self.n_users)

    def item_ids(self) -> np.ndarray:
        return np.fromiter(self.item_index.keys(), dtype=np.int64, count=self.n_items)


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RatingsDataset:
    """Deduplicated ratings, canonically ordered by (user_id, item_id)."""

    user_ids: np.ndarray
    item_ids: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    meta: DatasetMeta

    def __post_init__(self):
        object.__setattr__(self, "user_ids", _readonly(self.user_ids, np.int64))
        object.__setattr__(self, "item_ids", _readonly(self.item_ids, np.int64))
        object.__setattr__(self, "ratings", _readonly(self.ratings, np.float64))
        object.__setattr__(self, "timestamps", _readonly(self.timestamps, np.int64))
        n = len(self.user_ids)
        if not (len(self.item_ids) == len(self.ratings) == len(self.timestamps) == n):
            raise ValueError("column arrays must share one length")

    def __len__(self):
        return len(self.ratings)

    @property
    def records(self) -> tuple[RatingRecord, ...]:
        return tuple(self)

    def __iter__(self) -> Iterator[RatingRecord]:
        for u, i, r, t in zip(self.user_ids, self.item_ids, self.ratings, self.timestamps):
            yield RatingRecord(int(u), int(i), float(r), int(t))

    def keys(self) -> set[tuple[int, int]]:
        return set(zip(self.user_ids.tolist(), self.item_ids.tolist()))

    def subset(self, idx) -> "RatingsDataset":
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        return RatingsDataset(
            self.user_ids[idx], self.item_ids[idx], self.ratings[idx],
            self.timestamps[idx], self.meta,
        )

    def user_indices(self) -> np.ndarray:
        return _lookup(self.meta.user_index, self.user_ids, "user")

    def item_indices(self) -> np.ndarray:
        return _lookup(self.meta.item_index, self.item_ids, "item")


def _lookup(index, ids, kind):
    try:
        return np.fromiter((index[int(x)] for x in ids), dtype=np.int64, count=len(ids))
    except KeyError as exc:
        raise IndexMissing(f"{kind} id {exc.args[0]} not in index") from None


def from_arrays(user_ids, item_ids, ratings, timestamps=None) -> RatingsDataset:
    """Build a deduplicated dataset from parallel arrays.

    Duplicate (user, item) pairs keep the record with the largest timestamp;
    among equal timestamps the later position wins.
    """
    u = np.asarray(user_ids, dtype=np.int64)
    i = np.asarray(item_ids, dtype=np.int64)
    r = np.asarray(ratings, dtype=np.float64)
    t = np.zeros(len(u), dtype=np.int64) if timestamps is None else np.asarray(timestamps, dtype=np.int64)
    if len(u) == 0:
        raise EmptyDataset("no rating records")
    if np.any(t < 0):
        raise ValueError("timestamps must be non-negative")
    pos = np.arange(len(u))
    # last key of lexsort is primary: group by (user, item), newest last
    order = np.lexsort((pos, t, i, u))
    u, i, r, t = u[order], i[order], r[order], t[order]
    last = np.ones(len(u), dtype=bool)
    last[:-1] = (u[1:] != u[:-1]) | (i[1:] != i[:-1])
    u, i, r, t = u[last], i[last], r[last], t[last]
    meta = DatasetMeta.from_ids(u, i, r.min(), r.max())
    return RatingsDataset(u, i, r, t, meta)


def parse_movielens(source) -> RatingsDataset:
    """Parse tab-separated ``user item rating timestamp`` lines.

    ``source`` may be a path, a bytes object or a binary/text stream.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data

    users, items, ratings, stamps = [], [], [], []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) < 4:
            raise MalformedLine(lineno, f"expected 4 fields, got {len(fields)}")
        try:
            users.append(int(fields[0]))
            items.append(int(fields[1]))
            ratings.append(float(fields[2]))
            stamps.append(int(fields[3]))
        except ValueError:
            raise MalformedLine(lineno, "non-numeric field") from None
        if stamps[-1] < 0:
            raise MalformedLine(lineno, "negative timestamp")
    if not users:
        raise EmptyDataset("no rating records in source")
    return from_arrays(users, items, ratings, stamps)


def split_train_test(ds: RatingsDataset, test_fraction: float, seed: int):
    """Uniform record-level split; both halves keep ``ds.meta``."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    if len(ds) == 0:
        raise EmptyDataset("cannot split an empty dataset")
    n_test = int(round(test_fraction * len(ds)))
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.subset(perm[n_test:]), ds.subset(perm[:n_test])


@dataclass(frozen=True)
class InteractionMatrix:
    """Sparse user x item ratings with an explicit presence mask.

    ``values`` may hold explicit zeros (a legal rating on some scales); only
    ``mask`` says whether a cell was observed.
    """

    values: sp.csr_matrix
    mask: sp.csr_matrix
    meta: DatasetMeta
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_users(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.mask.nnz)

    def dense(self) -> np.ndarray:
        """Zero-filled dense ratings (rows are users)."""
        return self.values.toarray()

    def csc(self):
        if "csc" not in self._cache:
            self._cache["csc"] = (self.values.tocsc(), self.mask.tocsc())
        return self._cache["csc"]

    def user_means(self) -> np.ndarray:
        """Per-user mean rating; NaN for users with no ratings."""
        if "user_means" not in self._cache:
            counts = np.diff(self.mask.indptr)
            sums = np.asarray(self.values.sum(axis=1)).ravel()
            with np.errstate(invalid="ignore", divide="ignore"):
                self._cache["user_means"] = np.where(counts > 0, sums / counts, np.nan)
        return self._cache["user_means"]

    def user_counts(self) -> np.ndarray:
        return np.diff(self.mask.indptr)

    def global_mean(self) -> float:
        if self.nnz == 0:
            return 0.5 * (self.meta.scale_min + self.meta.scale_max)
        return float(self.values.sum() / self.nnz)

    def rated_items(self, user: int):
        """(item indices, ratings) observed for a user, in item order."""
        lo, hi = self.mask.indptr[user], self.mask.indptr[user + 1]
        return self.values.indices[lo:hi], self.values.data[lo:hi]

    def raters(self, item: int):
        """(user indices, ratings) observed for an item, in user order."""
        values, _ = self.csc()
        lo, hi = values.indptr[item], values.indptr[item + 1]
        return values.indices[lo:hi], values.data[lo:hi]

    def triples(self):
        coo = self.values.tocoo()
        return set(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))


def to_matrix(ds: RatingsDataset) -> InteractionMatrix:
    rows = ds.user_indices()
    cols = ds.item_indices()
    shape = (ds.meta.n_users, ds.meta.n_items)
    # coo -> csr keeps explicit zeros; inputs are deduplicated so no summing occurs
    values = sp.coo_matrix((ds.ratings, (rows, cols)), shape=shape).tocsr()
    values.sort_indices()
    mask = sp.csr_matrix(
        (np.ones(values.nnz, dtype=bool), values.indices.copy(), values.indptr.copy()),
        shape=shape,
    )
    return InteractionMatrix(values, mask, ds.meta)
