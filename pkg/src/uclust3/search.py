"""Partition search: maximum standardized Bn, then maximum Bn among significant partitions.

The homogeneity stage looks for the configuration with the largest
standardized Bn and tests it against the distribution of the maximum
over all ``gamma3(n)`` configurations. If homogeneity is rejected, the
clustering stage reports the significant configuration with the largest
raw Bn.

For ``n`` up to ``exhaustive_threshold`` both stages enumerate every
configuration. Above it, a multi-start steepest-ascent local search over
single relocations and cross-group swaps is used, and the clustering
stage runs a restricted search: it maximizes Bn within each track (no
singleton / one singleton) and, when that maximum is not significant,
walks down the track's group-size shapes in order of decreasing null
variance, maximizing Bn within each shape until one is significant.
This restricted search is a reconstruction; the published algorithm's
exact pruning rules are not available.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from uclust3 import _rng
from uclust3.combinat import MAX_ENUMERATION_N, partition_array, total_count
from uclust3.data import as_kernel
from uclust3.exceptions import DataError, DegenerateVarianceError
from uclust3.inference import TestOutcome, check_alpha, critical_value, pvalues
from uclust3.ustat import BlockState, Partition3, block_sums, bn_from_blocks, sizes_of
from uclust3.variance import VarianceModel, estimate_reference, variance_table

ALL, NONSINGLETON, SINGLETON, FIXED = "all", "nonsingleton", "singleton", "fixed"
_PHASE_STAGE1, _PHASE_TRACK, _PHASE_SHAPE = 1, 2, 3


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 20
    max_iters: int | None = None
    seed: int = 0
    allow_singleton: bool = True
    exhaustive_threshold: int = 9

    def __post_init__(self):
        if self.restarts < 1:
            raise DataError("restarts must be >= 1")
        if not 0 <= self.exhaustive_threshold <= MAX_ENUMERATION_N:
            raise DataError(f"exhaustive_threshold must lie in [0, {MAX_ENUMERATION_N}]")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    def iteration_cap(self, n: int) -> int:
        return self.max_iters if self.max_iters is not None else 200 * n


@dataclass(frozen=True)
class ClusterResult:
    homogeneous: bool
    partition: Partition3 | None
    bn: float
    std_bn: float
    p_value: float
    stage1_partition: Partition3
    stage1_std_bn: float
    stage1_p_value: float
    alpha: float
    n_star: int
    visited: int
    schedule: tuple = field(default=(), repr=False)

    def labels(self) -> np.ndarray:
        """1-based labels of the reported partition; all ones when homogeneous."""
        if self.partition is None:
            return np.ones(self.stage1_partition.n, dtype=np.int64)
        return self.partition.canonical().labels.copy()


class _Problem:
    """Kernel, variance lookup, significance threshold, and the running record
    of the best significant partition evaluated so far."""

    def __init__(self, values, model: VarianceModel, alpha: float, cfg: SearchConfig):
        self.values = values
        self.n = values.shape[0]
        self.cfg = cfg
        self.alpha = alpha
        self.count = total_count(self.n)
        self.log_n_star = self.count.log_gamma3
        table = variance_table(model)
        if not cfg.allow_singleton:
            for a in range(self.n + 1):
                for b in range(self.n + 1):
                    if 1 in (a, b, self.n - a - b):
                        table[a, b] = np.nan
        legal = ~np.isnan(table)
        if not legal.any():
            raise DataError(f"no legal three-group shape for n={self.n}")
        if (table[legal] <= 0).any():
            raise DegenerateVarianceError("degenerate variance: Bn has zero null variance")
        self.var_table = table
        self.crit = critical_value(alpha, n_star=None, n=self.n)
        self.thr_table = self.crit * np.sqrt(table)
        self.visited = 0
        self.best_sig_bn = -np.inf
        self.best_sig_labels: np.ndarray | None = None

    # shape helpers -------------------------------------------------------

    def var_of(self, sizes: np.ndarray) -> np.ndarray:
        return self.var_table[sizes[..., 0], sizes[..., 1]]

    def track_ok(self, sizes: np.ndarray, track: str) -> np.ndarray:
        lo = sizes.min(axis=-1)
        ones = (sizes == 1).sum(axis=-1)
        if track == NONSINGLETON:
            return lo >= 2
        if track == SINGLETON:
            return (ones == 1) & (lo >= 1)
        return (lo >= 1) & ~np.isnan(self.var_of(np.clip(sizes, 0, self.n)))

    def shapes(self, track: str) -> list[tuple[int, int, int]]:
        out = []
        for a in range(1, self.n):
            for b in range(a, self.n - a):
                c = self.n - a - b
                if c < b:
                    continue
                s = np.array([a, b, c])
                if np.isnan(self.var_of(s)) or not self.track_ok(s, track):
                    continue
                out.append((a, b, c))
        return out

    # scoring ---------------------------------------------------------------

    def score(self, bn: np.ndarray, sizes: np.ndarray, mode: str) -> np.ndarray:
        if mode == "std":
            return bn / np.sqrt(self.var_of(sizes))
        if mode == "bn":
            return bn
        # "sig": Bn, restricted to significant partitions
        return np.where(bn > self.thr_table[sizes[..., 0], sizes[..., 1]], bn, -np.inf)

    def note(self, bn: np.ndarray, sizes: np.ndarray, make_labels) -> None:
        """Update the best-significant record from a batch of evaluations."""
        self.visited += int(np.size(bn))
        sig = bn > self.thr_table[sizes[..., 0], sizes[..., 1]]
        if not sig.any():
            return
        cand = np.where(sig, bn, -np.inf)
        m = int(np.argmax(cand))
        if cand.flat[m] > self.best_sig_bn:
            self.best_sig_bn = float(cand.flat[m])
            self.best_sig_labels = make_labels(m)

    # neighbourhood ---------------------------------------------------------

    def neighbours(self, st: BlockState, track: str):
        """All single relocations and cross-group swaps that stay inside ``track``.

        Returns move descriptors ``(i, j, kind)`` with kind 0 = move i to
        group j, kind 1 = swap i and j, plus their block sums and sizes.
        """
        n = self.n
        labels = st.labels
        eye = np.eye(3)
        parts_i, parts_j, parts_k, parts_s, parts_z = [], [], [], [], []
        if track != FIXED:
            idx = np.repeat(np.arange(n), 2)
            src = labels[idx]
            dst = (src + np.tile([1, 2], n)) % 3
            d = eye[dst] - eye[src]
            new_sizes = st.sizes[None, :] + d.astype(np.intp)
            ok = self.track_ok(new_sizes, track)
            if ok.any():
                idx, dst, d, new_sizes = idx[ok], dst[ok], d[ok], new_sizes[ok]
                r = st.rows[idx]
                sums = st.sums[None] + d[:, :, None] * r[:, None, :] + r[:, :, None] * d[:, None, :]
                parts_i.append(idx)
                parts_j.append(dst)
                parts_k.append(np.zeros(idx.size, dtype=np.intp))
                parts_s.append(sums)
                parts_z.append(new_sizes)
        ii, jj = np.triu_indices(n, 1)
        keep = labels[ii] != labels[jj]
        ii, jj = ii[keep], jj[keep]
        if ii.size:
            d = eye[labels[jj]] - eye[labels[ii]]
            u = st.rows[ii] - st.rows[jj] - self.values[ii, jj][:, None] * d
            sums = st.sums[None] + d[:, :, None] * u[:, None, :] + u[:, :, None] * d[:, None, :]
            parts_i.append(ii)
            parts_j.append(jj)
            parts_k.append(np.ones(ii.size, dtype=np.intp))
            parts_s.append(sums)
            parts_z.append(np.broadcast_to(st.sizes, (ii.size, 3)))
        if not parts_i:
            return None
        return (np.concatenate(parts_i), np.concatenate(parts_j), np.concatenate(parts_k),
                np.concatenate(parts_s), np.concatenate(parts_z))

    @staticmethod
    def apply(st: BlockState, i: int, j: int, kind: int) -> None:
        if kind == 0:
            st.move(i, j)
        else:
            st.swap(i, j)

    def ascend(self, labels0, mode: str, track: str) -> tuple[BlockState, float]:
        """Steepest ascent from ``labels0``; ties go to the first move in
        (relocations by index, then swaps by index pair) order."""
        st = BlockState(self.values, labels0)
        cur_bn = np.array(st.bn())
        self.note(cur_bn[None], st.sizes[None], lambda m: st.labels.copy())
        cur = float(self.score(cur_bn, st.sizes, mode))
        for _ in range(self.cfg.iteration_cap(self.n)):
            nb = self.neighbours(st, track)
            if nb is None:
                break
            ii, jj, kk, sums, sizes = nb
            bns = bn_from_blocks(sums, sizes, self.n)

            def make(m, st=st, ii=ii, jj=jj, kk=kk):
                tmp = BlockState(self.values, st.labels)
                self.apply(tmp, int(ii[m]), int(jj[m]), int(kk[m]))
                return tmp.labels.copy()

            self.note(bns, sizes, make)
            scores = self.score(bns, sizes, mode)
            m = int(np.argmax(scores))
            best = float(scores[m])
            if not best > cur + 1e-12 * max(1.0, abs(cur)):
                break
            self.apply(st, int(ii[m]), int(jj[m]), int(kk[m]))
            cur = best
        st.recompute()
        return st, float(self.score(np.array(st.bn()), st.sizes, mode))

    # starting points -------------------------------------------------------

    def random_start(self, sizes, rng: np.random.Generator) -> np.ndarray:
        return rng.permutation(np.repeat(np.arange(3), sizes)).astype(np.intp)

    def quantile_start(self, sizes) -> np.ndarray:
        """Split observations by distance to the most remote one."""
        anchor = int(np.argmax(self.values.sum(axis=1)))
        order = np.argsort(self.values[anchor], kind="stable")
        if sizes[0] == 1:
            # remote point alone, the rest split by distance to it
            order = np.concatenate([[anchor], order[order != anchor][::-1]])
        labels = np.empty(self.n, dtype=np.intp)
        labels[order] = np.repeat(np.arange(3), sizes)
        return labels

    def reshape(self, labels0, target) -> np.ndarray:
        """Greedy Bn-preserving relocations until the sizes match ``target``."""
        st = BlockState(self.values, labels0)
        order = np.argsort(st.sizes, kind="stable")
        want = np.empty(3, dtype=np.intp)
        want[order] = sorted(target)
        while (st.sizes != want).any():
            over = np.flatnonzero(st.sizes > want)
            under = np.flatnonzero(st.sizes < want)
            best, move = -np.inf, None
            for a in over:
                members = np.flatnonzero(st.labels == a)
                for b in under:
                    d = np.zeros(3)
                    d[b], d[a] = 1.0, -1.0
                    r = st.rows[members]
                    sums = st.sums[None] + d[None, :, None] * r[:, None, :] + r[:, :, None] * d[None, None, :]
                    sizes = st.sizes + d.astype(np.intp)
                    if min(sizes) < 1:
                        continue
                    vals = bn_from_blocks(sums, np.broadcast_to(sizes, (members.size, 3)), self.n)
                    m = int(np.argmax(vals))
                    if vals[m] > best:
                        best, move = vals[m], (int(members[m]), int(b))
            st.move(*move)
        return st.labels.copy()

    def starts(self, sizes, phase: int, track_id: int) -> list[np.ndarray]:
        out = [self.quantile_start(sizes)]
        for r in range(self.cfg.restarts):
            out.append(self.random_start(sizes, _rng.generator(self.cfg.seed, _rng.SEARCH, phase, track_id, r)))
        return out

    def best_of(self, starts, mode: str, track: str) -> tuple[np.ndarray, float]:
        best_labels, best_score = None, -np.inf
        for labels0 in starts:
            st, score = self.ascend(labels0, mode, track)
            if score > best_score:
                best_labels, best_score = st.labels.copy(), score
        return best_labels, best_score

    # evaluation ------------------------------------------------------------

    def evaluate(self, labels0) -> tuple[float, float, float, tuple]:
        labels0 = np.asarray(labels0)
        sizes = sizes_of(labels0)
        value = float(bn_from_blocks(block_sums(self.values, labels0), sizes, self.n))
        var = float(self.var_of(sizes))
        std = value / math.sqrt(var)
        p = float(pvalues(std, self.log_n_star))
        return value, std, p, tuple(int(s) for s in sizes)


def _to_partition(labels0) -> Partition3:
    return Partition3(np.asarray(labels0, dtype=np.int64) + 1).canonical()


def _prepare(k, model, cfg, alpha):
    values = as_kernel(k)
    n = values.shape[0]
    if n < 5:
        raise DataError(f"three-group search needs n >= 5, got {n}")
    cfg = cfg if cfg is not None else SearchConfig()
    if model is None:
        model = estimate_reference(values, seed=cfg.seed)
    if model.n != n:
        raise DataError(f"variance model built for n={model.n}, kernel has n={n}")
    if model.degenerate:
        raise DegenerateVarianceError("degenerate variance: Bn has zero null variance")
    return _Problem(values, model, alpha, cfg)


def _exhaustive_scores(prob: _Problem):
    rows = partition_array(prob.n, allow_singleton=prob.cfg.allow_singleton).astype(np.intp)
    sizes = sizes_of(rows)
    bns = bn_from_blocks(block_sums(prob.values, rows), sizes, prob.n)
    std = bns / np.sqrt(prob.var_of(sizes))
    prob.visited += rows.shape[0]
    return rows, sizes, bns, std


def _stage1(prob: _Problem):
    n = prob.n
    if n <= prob.cfg.exhaustive_threshold:
        rows, sizes, bns, std = _exhaustive_scores(prob)
        m = int(np.argmax(std))
        return rows[m], (rows, sizes, bns, std)
    starts = []
    shapes = prob.shapes(ALL)
    balanced = min(shapes, key=lambda s: (s.count(1), s[2] - s[0]))
    starts.extend(prob.starts(balanced, _PHASE_STAGE1, 0))
    singles = [s for s in shapes if s[0] == 1]
    if singles:
        sref = min(singles, key=lambda s: s[2] - s[1])
        starts.append(prob.quantile_start(sref))
    labels, _ = prob.best_of(starts, "std", ALL)
    return labels, None


def _outcome(prob: _Problem, labels0) -> TestOutcome:
    value, std, p, sizes = prob.evaluate(labels0)
    return TestOutcome(
        bn=value,
        variance=float(prob.var_of(np.array(sizes))),
        std_bn=std,
        p_value=p,
        alpha=prob.alpha,
        reject=p < prob.alpha,
        n_star=prob.count.gamma3,
        sizes=sizes,
    )


def maximize_std_bn(k, model: VarianceModel | None = None, cfg: SearchConfig | None = None,
                    alpha: float = 0.05) -> tuple[Partition3, TestOutcome]:
    """Configuration with the largest standardized Bn and its max-test outcome."""
    alpha = check_alpha(alpha)
    prob = _prepare(k, model, cfg, alpha)
    labels, _ = _stage1(prob)
    return _to_partition(labels), _outcome(prob, labels)


def _restricted_track(prob: _Problem, track: str, track_id: int, seed_labels, schedule: list) -> None:
    """Maximize Bn inside a track; if not significant, walk shapes of decreasing variance."""
    shapes = prob.shapes(track)
    if not shapes:
        return
    ref = min(shapes, key=lambda s: s[2] - s[0] if s[0] > 1 else s[2] - s[1])
    starts = prob.starts(ref, _PHASE_TRACK, track_id)
    if seed_labels is not None and prob.track_ok(sizes_of(seed_labels), track):
        starts.insert(0, np.asarray(seed_labels))
    labels, _ = prob.best_of(starts, "bn", track)
    value, std, p, sizes = prob.evaluate(labels)
    cur_var = float(prob.var_of(np.array(sizes)))
    schedule.append((track, tuple(sorted(sizes)), cur_var, p < prob.alpha))
    if p < prob.alpha:
        return
    lower = [s for s in shapes if prob.var_of(np.array(s)) < cur_var]
    lower.sort(key=lambda s: (-float(prob.var_of(np.array(s))), s))
    n_random = min(prob.cfg.restarts, 3)
    for shape_id, shape in enumerate(lower):
        starts = [prob.reshape(labels, shape), prob.quantile_start(shape)]
        for r in range(n_random):
            rng = _rng.generator(prob.cfg.seed, _rng.SEARCH, _PHASE_SHAPE, track_id, shape_id, r)
            starts.append(prob.random_start(shape, rng))
        cand, _ = prob.best_of(starts, "bn", FIXED)
        value, std, p, _ = prob.evaluate(cand)
        var = float(prob.var_of(np.array(shape)))
        schedule.append((track, shape, var, p < prob.alpha))
        if p < prob.alpha:
            return


def uclust3(k, alpha: float = 0.05, model: VarianceModel | None = None,
            cfg: SearchConfig | None = None) -> ClusterResult:
    """Test overall homogeneity and, if rejected, return the largest-Bn significant partition."""
    alpha = check_alpha(alpha)
    prob = _prepare(k, model, cfg, alpha)
    stage1_labels, table = _stage1(prob)
    s_bn, s_std, s_p, _ = prob.evaluate(stage1_labels)
    stage1 = _to_partition(stage1_labels)
    common = dict(stage1_partition=stage1, stage1_std_bn=s_std, stage1_p_value=s_p,
                  alpha=alpha, n_star=prob.count.gamma3)
    if not s_p < alpha:
        return ClusterResult(homogeneous=True, partition=None, bn=s_bn, std_bn=s_std, p_value=s_p,
                             visited=prob.visited, **common)
    schedule: list = []
    if table is not None:
        rows, sizes, bns, std = table
        sig = pvalues(std, prob.log_n_star) < alpha
        m = int(np.argmax(np.where(sig, bns, -np.inf)))
        best = rows[m]
    else:
        prob.note(np.array([s_bn]), sizes_of(stage1_labels)[None], lambda m: np.array(stage1_labels))
        _restricted_track(prob, NONSINGLETON, 0, stage1_labels, schedule)
        if prob.cfg.allow_singleton:
            _restricted_track(prob, SINGLETON, 1, stage1_labels, schedule)
        # final climb in Bn over significant neighbours of the best significant partition
        prob.ascend(prob.best_sig_labels, "sig", ALL)
        best = prob.best_sig_labels
    value, std, p, _ = prob.evaluate(best)
    return ClusterResult(homogeneous=False, partition=_to_partition(best), bn=value, std_bn=std,
                         p_value=p, visited=prob.visited, schedule=tuple(schedule), **common)
