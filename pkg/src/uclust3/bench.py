"""Simulation studies: data generation, Adjusted Rand Index, a k-means baseline,
and power / ARI study runners."""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from uclust3 import _rng
from uclust3.data import DataMatrix, kernel_matrix
from uclust3.exceptions import DataError
from uclust3.search import SearchConfig, maximize_std_bn, uclust3
from uclust3.variance import DEFAULT_REPS, estimate_reference


@dataclass(frozen=True)
class Scenario:
    """Three Gaussian groups with unit per-coordinate standard deviation."""

    n: int
    L: int
    sizes: tuple[int, int, int]
    means: tuple[float, float, float]
    reps: int = 100
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        means = tuple(float(m) for m in self.means)
        if len(sizes) != len(means):
            raise DataError(f"sizes has {len(sizes)} entries but means has {len(means)}")
        if len(sizes) != 3:
            raise DataError("a scenario needs exactly three groups")
        if sum(sizes) != self.n:
            raise DataError(f"sizes {sizes} sum to {sum(sizes)}, not n={self.n}")
        if min(sizes) < 1 or self.L < 1 or self.reps < 1:
            raise DataError("group sizes, L and reps must be positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "means", means)

    def truth(self) -> np.ndarray:
        return np.repeat(np.arange(1, 4), self.sizes)


@dataclass
class StudyRow:
    scenario: Scenario
    table: str
    method: str
    value: float
    sd: float
    per_replicate: list = field(default_factory=list, repr=False)

    def flat(self) -> dict:
        s = self.scenario
        return {
            "table": self.table,
            "method": self.method,
            "n": s.n,
            "L": s.L,
            "n1": s.sizes[0],
            "n2": s.sizes[1],
            "n3": s.sizes[2],
            "m1": s.means[0],
            "m2": s.means[1],
            "m3": s.means[2],
            "reps": s.reps,
            "alpha": s.alpha,
            "seed": s.seed,
            "value": self.value,
            "sd": self.sd,
        }


def simulate_dataset(s: Scenario, replicate: int) -> tuple[DataMatrix, np.ndarray]:
    """Draw replicate ``replicate`` of scenario ``s``.

    Rows are grouped in order (group 1 first). Normals come from numpy's
    PCG64 ``standard_normal`` keyed by ``(seed, replicate)``.
    """
    rng = _rng.generator(s.seed, _rng.DATA, replicate)
    x = rng.standard_normal((s.n, s.L))
    x += np.repeat(np.asarray(s.means), s.sizes)[:, None]
    return DataMatrix(x), s.truth()


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def ari(a, b) -> float:
    """Hubert-Arabie Adjusted Rand Index between two labelings."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise DataError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise DataError("ARI needs at least two observations")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1)
    index = _comb2(table).sum()
    sa = _comb2(table.sum(axis=1)).sum()
    sb = _comb2(table.sum(axis=0)).sum()
    expected = sa * sb / _comb2(a.size)
    top = (sa + sb) / 2
    if top == expected:
        # both labelings trivial (one cluster, or all singletons)
        return 1.0
    return float((index - expected) / (top - expected))


def _spread_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted seeding: each new centre drawn with probability
    proportional to squared distance from the nearest chosen centre."""
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            nxt = int(rng.choice(np.setdiff1d(np.arange(n), chosen)))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _lloyd(x: np.ndarray, centres: np.ndarray, max_iter: int) -> tuple[np.ndarray, float]:
    k = centres.shape[0]
    labels = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # refill an empty cluster with the point farthest from its centroid
            own = d2[np.arange(x.shape[0]), new]
            movable = counts[new] > 1
            far = int(np.argmax(np.where(movable, own, -np.inf)))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            d2[far, c] = 0.0
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centres = np.stack([x[labels == c].mean(axis=0) for c in range(k)])
    wcss = float(((x - centres[labels]) ** 2).sum())
    return labels, wcss


def kmeans(data, k: int, seed: int = 0, restarts: int = 1, max_iter: int = 300) -> np.ndarray:
    """Lloyd's k-means; returns 1-based labels of the lowest-WCSS restart."""
    x = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must lie in [1, {n}], got {k}")
    best, best_wcss = None, np.inf
    for r in range(max(1, restarts)):
        rng = _rng.generator(seed, _rng.KMEANS, r)
        labels, wcss = _lloyd(x, _spread_seeds(x, k, rng), max_iter)
        if wcss < best_wcss:
            best, best_wcss = labels, wcss
    return best + 1


@dataclass(frozen=True)
class StudySettings:
    """Inner-procedure knobs shared by every replicate of a study."""

    var_reps: int = DEFAULT_REPS
    scheme: str = "coordinates"
    restarts: int = 20
    kernel: str = "msd"
    kmeans_restarts: int = 1


def _replicate_seed(s: Scenario, replicate: int) -> int:
    return int(_rng.generator(s.seed, _rng.STUDY, replicate).integers(2**31 - 1))


def _power_replicate(args) -> bool:
    s, replicate, settings = args
    data, _ = simulate_dataset(s, replicate)
    k = kernel_matrix(data, settings.kernel)
    seed = _replicate_seed(s, replicate)
    model = estimate_reference(k, reps=settings.var_reps, seed=seed, scheme=settings.scheme, data=data)
    cfg = SearchConfig(restarts=settings.restarts, seed=seed)
    _, outcome = maximize_std_bn(k, model, cfg, alpha=s.alpha)
    return bool(outcome.reject)


def _ari_replicate(args) -> float:
    s, replicate, settings, method = args
    data, truth = simulate_dataset(s, replicate)
    seed = _replicate_seed(s, replicate)
    if method == "kmeans":
        labels = kmeans(data, 3, seed=seed, restarts=settings.kmeans_restarts)
    else:
        k = kernel_matrix(data, settings.kernel)
        model = estimate_reference(k, reps=settings.var_reps, seed=seed, scheme=settings.scheme, data=data)
        result = uclust3(k, s.alpha, model, SearchConfig(restarts=settings.restarts, seed=seed))
        labels = result.labels()
    return ari(labels, truth)


def _run(fn, jobs, threads: int):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def power_study(s: Scenario, settings: StudySettings | None = None, threads: int = 1) -> StudyRow:
    """Fraction of replicates where the homogeneity stage rejects."""
    settings = settings or StudySettings()
    rejects = _run(_power_replicate, [(s, r, settings) for r in range(s.reps)], threads)
    power = sum(rejects) / s.reps
    sd = float(np.sqrt(power * (1 - power) / s.reps))
    return StudyRow(s, "power", "uclust3", power, sd, [int(v) for v in rejects])


def ari_study(s: Scenario, method: str = "uclust3", settings: StudySettings | None = None,
              threads: int = 1) -> StudyRow:
    """Mean and standard deviation of ARI against the generating labels.

    A homogeneous verdict is scored as the single-cluster labeling.
    """
    if method not in ("uclust3", "kmeans"):
        raise DataError(f"unknown method {method!r}")
    settings = settings or StudySettings()
    scores = _run(_ari_replicate, [(s, r, settings, method) for r in range(s.reps)], threads)
    arr = np.asarray(scores)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return StudyRow(s, "ari", method, float(arr.mean()), sd, [float(v) for v in scores])


def write_study(rows: list[StudyRow], path, config: dict) -> tuple[Path, Path]:
    """Write the flat CSV table and a JSON sidecar with the full configuration."""
    path = Path(path)
    flat = [r.flat() for r in rows]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(flat[0]))
        writer.writeheader()
        writer.writerows(flat)
    sidecar = path.with_suffix(path.suffix + ".json")
    payload = {
        "config": config,
        "scenarios": [asdict(r.scenario) for r in rows],
        "per_replicate": [r.per_replicate for r in rows],
    }
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path, sidecar
