"""K-means++ clustering of collision-free events in occupation space."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import OutputPattern, pattern_array
from .samplers import EventSet

WCSS_RTOL = 1e-12


class EmptyClusterWarning(UserWarning):
    pass


def l2_distance(p, q) -> float:
    """Euclidean distance between two occupation vectors (or patterns)."""
    p = p.occupation() if isinstance(p, OutputPattern) else np.asarray(p, dtype=float)
    q = q.occupation() if isinstance(q, OutputPattern) else np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


def _points(events) -> np.ndarray:
    if isinstance(events, EventSet):
        return events.occupations()
    pts = np.asarray(events, dtype=float)
    if pts.ndim != 2:
        raise ValueError("events must be an EventSet or an (N, m) array")
    return pts


def squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest centroid (lowest index on ties) and the squared distance."""
    d2 = squared_distances(points, centroids)
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(points.shape[0]), idx]


def kmeanspp_init(events, k: int, seed) -> np.ndarray:
    """K-means++ seeding.

    The first centroid is a uniformly chosen event; each further centroid is
    an event drawn with probability proportional to its squared distance to
    the nearest centroid chosen so far. Duplicate events count with
    multiplicity.

    Returns
    -------
    numpy.ndarray
        ``(k, m)`` initial centroids.
    """
    pts = _points(events)
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(pts, axis=0).shape[0]
    if distinct < k:
        raise ValueError(f"k = {k} exceeds the {distinct} distinct events")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(pts.shape[0]))]
    d2 = np.sum((pts - pts[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        # cumulative draw keeps the choice exact for integer-valued weights
        target = rng.random() * total
        nxt = int(np.searchsorted(np.cumsum(d2), target, side="right"))
        nxt = min(nxt, pts.shape[0] - 1)
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((pts - pts[nxt]) ** 2, axis=1))
    return pts[chosen].copy()


@dataclass
class ClusterModel:
    k: int
    m: int
    centroids: np.ndarray
    member_counts: np.ndarray
    radii: np.ndarray
    seed: int | None = None
    iterations_used: int = 0
    labels: np.ndarray | None = None
    wcss_history: list = field(default_factory=list)

    def assign(self, event) -> int:
        return assign(self, event)

    def assign_points(self, points) -> np.ndarray:
        return nearest(np.asarray(points, dtype=float), self.centroids)[0]

    def pattern_assignment(self, n: int) -> np.ndarray:
        """Cluster index for every collision-free pattern, in lexicographic order."""
        patterns = pattern_array(self.m, n)
        occ = np.zeros((patterns.shape[0], self.m))
        np.put_along_axis(occ, patterns, 1.0, axis=1)
        return self.assign_points(occ)

    def cumulative_counts(self) -> np.ndarray:
        """Cumulative member counts with clusters sorted from fewest to most events."""
        return np.cumsum(np.sort(self.member_counts))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "centroids": self.centroids.tolist(),
            "member_counts": [int(c) for c in self.member_counts],
            "radii": self.radii.tolist(),
            "seed": self.seed,
            "iterations_used": self.iterations_used,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterModel":
        return cls(
            k=int(doc["k"]),
            m=int(doc["m"]),
            centroids=np.asarray(doc["centroids"], dtype=float).reshape(int(doc["k"]), int(doc["m"])),
            member_counts=np.asarray(doc["member_counts"], dtype=np.int64),
            radii=np.asarray(doc["radii"], dtype=float),
            seed=doc.get("seed"),
            iterations_used=int(doc.get("iterations_used", 0)),
        )

    @classmethod
    def load(cls, path) -> "ClusterModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def kmeans_fit(events, k: int, seed, max_iter: int = 300, tol: float = 1e-6) -> ClusterModel:
    """K-means++ seeding followed by Lloyd iterations.

    Stops when no centroid moves by more than ``tol`` or after ``max_iter``
    iterations. A cluster left without members is re-seeded at the event
    farthest from its current nearest centroid. Raises ``AssertionError`` if
    the within-cluster sum of squares ever increases.
    """
    pts = _points(events)
    centroids = kmeanspp_init(pts, k, seed)
    history = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        labels, d2 = nearest(pts, centroids)
        wcss = float(d2.sum())
        if history and wcss > history[-1] * (1 + WCSS_RTOL) + WCSS_RTOL:
            raise AssertionError(f"WCSS increased: {history[-1]} -> {wcss}")
        history.append(wcss)
        new = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, pts)
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        for c in np.flatnonzero(~filled):
            far = int(np.argmax(d2))
            new[c] = pts[far]
            d2[far] = 0.0
        shift = float(np.max(np.sqrt(np.sum((new - centroids) ** 2, axis=1))))
        centroids = new
        if shift < tol:
            break
    labels, d2 = nearest(pts, centroids)
    history.append(float(d2.sum()))
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    radii = np.zeros(k)
    np.maximum.at(radii, labels, np.sqrt(d2))
    return ClusterModel(
        k=k,
        m=pts.shape[1],
        centroids=centroids,
        member_counts=counts,
        radii=radii,
        seed=seed if isinstance(seed, int) else None,
        iterations_used=iterations,
        labels=labels,
        wcss_history=history,
    )


def assign(model: ClusterModel, event) -> int:
    """Nearest centroid under the 2-norm; ties go to the lowest index."""
    if isinstance(event, OutputPattern):
        point = event.occupation()
    else:
        point = np.asarray(event, dtype=float)
    return int(nearest(point[None, :], model.centroids)[0][0])
