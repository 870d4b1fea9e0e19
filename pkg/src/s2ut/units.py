"""k-means unit quantizer and the reduced-unit codec."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .checkpoint import load_arrays, save_arrays
from .rng import RngStream


@dataclass
class Codebook:
    centroids: np.ndarray  # [K, D]

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2:
            raise ValueError("centroids must be [K, D]")
        if not np.isfinite(self.centroids).all():
            raise ValueError("centroids must be finite")
        k = self.centroids.shape[0]
        if k > 1:
            d2 = _sq_dists(self.centroids, self.centroids)
            d2[np.arange(k), np.arange(k)] = np.inf
            if d2.min() == 0.0:
                raise ValueError("codebook contains duplicate centroids")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def save(self, dir_path) -> None:
        save_arrays(dir_path, {"centroids": self.centroids}, bin_name="centroids.bin")

    @staticmethod
    def load(dir_path) -> "Codebook":
        return Codebook(load_arrays(dir_path)["centroids"])


@dataclass
class UnitSequence:
    """Language-tagged discrete unit ids, framewise (raw) or deduplicated."""

    lang: str
    units: list[int]
    form: str = "raw"

    def __post_init__(self):
        self.units = [int(u) for u in self.units]
        if self.form not in ("raw", "reduced"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.form == "reduced":
            for a, b in zip(self.units, self.units[1:]):
                if a == b:
                    raise ValueError("reduced sequence has adjacent duplicates")

    def __len__(self):
        return len(self.units)


def reduce_units(seq: UnitSequence) -> UnitSequence:
    """Collapse consecutive duplicates; idempotent, order preserving."""
    out: list[int] = []
    for u in seq.units:
        if not out or out[-1] != u:
            out.append(u)
    return UnitSequence(seq.lang, out, form="reduced")


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """[N, K] squared Euclidean distances."""
    return (
        (x * x).sum(axis=1, keepdims=True)
        - 2.0 * (x @ c.T)
        + (c * c).sum(axis=1)[None, :]
    )


def kmeans_assign(features: np.ndarray, cb: Codebook, lang: str = "") -> UnitSequence:
    """Nearest-centroid ids per frame; ties break to the lowest id."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != cb.dim:
        raise ValueError(f"features [T, {cb.dim}] expected, got {features.shape}")
    ids = np.argmin(_sq_dists(features, cb.centroids), axis=1)
    return UnitSequence(lang, ids.tolist(), form="raw")


@dataclass
class KmeansResult:
    codebook: Codebook
    inertia_history: list[float] = field(default_factory=list)
    n_iters: int = 0


def kmeans_fit(features: np.ndarray, k: int, max_iters: int = 50, seed: int = 0,
               rng: RngStream | None = None) -> KmeansResult:
    """Lloyd's algorithm with k-means++ init.

    Iterates to an assignment fixpoint or ``max_iters``; empty clusters are
    re-seeded to the point farthest from its assigned centroid; the inertia
    history is non-increasing.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < k:
        raise ValueError(f"kmeans_fit needs at least K={k} points, got {n}")
    rng = rng if rng is not None else RngStream(seed).split("kmeans")

    # k-means++ seeding
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = _sq_dists(x, centroids[:1]).min(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            r = rng.uniform() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, _sq_dists(x, centroids[i : i + 1]).min(axis=1))

    assign = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    iters = 0
    for _ in range(max_iters):
        iters += 1
        dist = _sq_dists(x, centroids)
        new_assign = dist.argmin(axis=1)
        history.append(float(dist[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        point_d2 = dist[np.arange(n), assign]
        for c in range(k):
            mask = assign == c
            if mask.any():
                centroids[c] = x[mask].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centroids[c] = x[far]
                assign[far] = c
                point_d2[far] = 0.0
    return KmeansResult(Codebook(centroids), history, iters)


def relabel_to_reference(cb: Codebook, reference: np.ndarray) -> Codebook:
    """Permute cluster ids so centroid i sits closest to reference row i.

    Used to pin quantizer ids to the renderer's fixed unit grid; the
    optimal bijection comes from the assignment problem on squared
    distances.
    """
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape != cb.centroids.shape:
        raise ValueError("reference shape must match centroids")
    cost = _sq_dists(reference, cb.centroids)
    rows, cols = linear_sum_assignment(cost)
    permuted = np.empty_like(cb.centroids)
    permuted[rows] = cb.centroids[cols]
    return Codebook(permuted)


@dataclass
class UnitVocab:
    """Unit ids [0, K) plus pad/bos/eos/mask and language tags."""

    k: int
    langs: tuple[str, ...]

    @property
    def pad(self) -> int:
        return self.k

    @property
    def bos(self) -> int:
        return self.k + 1

    @property
    def eos(self) -> int:
        return self.k + 2

    @property
    def mask(self) -> int:
        return self.k + 3

    def lang_tag(self, lang: str) -> int:
        return self.k + 4 + self.langs.index(lang)

    @property
    def size(self) -> int:
        return self.k + 4 + len(self.langs)

    @property
    def specials(self) -> dict[str, int]:
        out = {"pad": self.pad, "bos": self.bos, "eos": self.eos, "mask": self.mask}
        for lang in self.langs:
            out[f"lang:{lang}"] = self.lang_tag(lang)
        return out
