"""Per-group bit metric computation for layered space-time codewords.

A received codeword Y = diag(lam) Z + N splits into d independent groups,
one per layer: entry (u, c) with c = (u + v - 1) mod d belongs to layer v
and carries (G x_v)[u] times the layer weight.  Unwinding the unitary
weight leaves every group with the same linear model

    y_v = diag(lam) G x_v + noise,

so a single QR factorization of diag(lam) G serves the whole frame.  Bit
metrics are exact subset minima of the squared residual, computed by full
enumeration for d <= 3 and by Schnorr-Euchner depth-first sphere searches
for larger d.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fec import QamConstellation
from .pstbc import PerfectCodeParams, omega_matrix


def group_columns(dim: int) -> np.ndarray:
    """cols[v-1, u] = column index of layer v at receive row u."""
    u = np.arange(dim)
    v = np.arange(dim)
    return (u[None, :] + v[:, None]) % dim


def group_decompose(y: np.ndarray, params: PerfectCodeParams) -> np.ndarray:
    """Split codeword observation(s) into weight-corrected group vectors.

    y: (d, d) or (batch, d, d).  Returns matching (d, d) or (batch, d, d)
    with row v-1 holding conj(omega_v) * y[u, (u + v - 1) % d].
    """
    y = np.asarray(y)
    d = params.dim
    if y.shape[-2:] != (d, d):
        raise ValueError(f"observation trailing dims must be ({d}, {d})")
    cols = group_columns(d)
    weights = np.stack([omega_matrix(params, v + 1).diagonal() for v in range(d)])
    gathered = y[..., np.arange(d)[None, :], cols]
    return weights.conj() * gathered


def qr_reduce(m: np.ndarray):
    """QR with real nonnegative diagonal of R (zero diagonals left alone)."""
    q, r = np.linalg.qr(np.asarray(m))
    for i in range(r.shape[0]):
        pivot = r[i, i]
        if abs(pivot) > 0:
            rot = pivot.conjugate() / abs(pivot)
            r[i, :] *= rot
            q[:, i] *= rot.conjugate()
    return q, r


@dataclass
class BitMetricSet:
    """gamma[g, m, j, b]: min residual for group g, symbol m, bit j = b."""

    gamma: np.ndarray
    umin: np.ndarray


class MetricEngine:
    """Exact per-group bit metrics for a fixed diag(lam) G model.

    mode 'exhaustive' enumerates the full K^d candidate grid (default for
    d <= 3); 'sphere' runs one unconstrained and per-bit complement
    Schnorr-Euchner searches (default for d >= 4).
    """

    def __init__(self, params: PerfectCodeParams, constellation: QamConstellation,
                 lam: np.ndarray, mode: str | None = None):
        lam = np.asarray(lam, dtype=float)
        d = params.dim
        if lam.shape != (d,):
            raise ValueError(f"lam must have shape ({d},)")
        if (lam < 0).any():
            raise ValueError("singular values must be nonnegative")
        if mode is None:
            mode = "exhaustive" if d <= 3 else "sphere"
        if mode not in ("exhaustive", "sphere"):
            raise ValueError("mode must be 'exhaustive' or 'sphere'")
        self.params = params
        self.constellation = constellation
        self.lam = lam
        self.mode = mode
        self.dim = d
        q, r = qr_reduce(lam[:, None] * params.generator)
        self._q_h = q.conj().T
        self._r = r
        k = constellation.order
        if mode == "exhaustive":
            grids = np.meshgrid(*([np.arange(k)] * d), indexing="ij")
            labels = np.stack([g.ravel() for g in grids])      # (d, k^d)
            self._images = r @ constellation.points[labels]    # (d, k^d)
        else:
            self._diag_images = r.diagonal()[:, None] * constellation.points[None, :]

    def bit_metrics(self, groups: np.ndarray) -> BitMetricSet:
        """groups: (n_groups, d) weight-corrected observations."""
        g = np.asarray(groups)
        if g.ndim != 2 or g.shape[1] != self.dim:
            raise ValueError(f"groups must be (n, {self.dim})")
        qobs = g @ self._q_h.T
        if self.mode == "exhaustive":
            return self._metrics_exhaustive(qobs)
        return self._metrics_sphere(qobs)

    def _metrics_exhaustive(self, qobs: np.ndarray) -> BitMetricSet:
        c = self.constellation
        d, k = self.dim, c.order
        n = qobs.shape[0]
        dists = np.abs(qobs[:, :, None] - self._images[None]) ** 2
        dists = dists.sum(axis=1).reshape((n,) + d * (k,))
        gamma = np.empty((n, d, c.bits_per_symbol, 2))
        axes = tuple(range(1, d + 1))
        for m in range(d):
            reduce_over = tuple(a for a in axes if a != m + 1)
            per_label = dists.min(axis=reduce_over)
            for j in range(c.bits_per_symbol):
                for b in (0, 1):
                    gamma[:, m, j, b] = per_label[:, c.subset_indices[j, b]].min(axis=1)
        umin = gamma[:, 0, 0, :].min(axis=1)
        return BitMetricSet(gamma=gamma, umin=umin)

    def _metrics_sphere(self, qobs: np.ndarray) -> BitMetricSet:
        c = self.constellation
        d, bps = self.dim, c.bits_per_symbol
        n = qobs.shape[0]
        gamma = np.empty((n, d, bps, 2))
        umin = np.empty(n)
        full = np.arange(c.order)
        for g in range(n):
            q = qobs[g]
            best, labels = self._search(q, [full] * d, np.inf)
            umin[g] = best
            for m in range(d):
                for j in range(bps):
                    hit = c.qam_bit_label(int(labels[m]), j)
                    gamma[g, m, j, hit] = best
                    subset = c.subset_indices[j, 1 - hit]
                    seed = self._substitute_bound(q, labels, m, subset)
                    cands = [full] * d
                    cands[m] = subset
                    val, _ = self._search(q, cands, seed)
                    gamma[g, m, j, 1 - hit] = val
        return BitMetricSet(gamma=gamma, umin=umin)

    def _substitute_bound(self, q, labels, m, subset) -> float:
        """Achievable cost: best single-symbol substitution at position m."""
        pts = self.constellation.points
        x = pts[labels.astype(int)]
        best = np.inf
        for lab in subset:
            x[m] = pts[lab]
            cost = float((np.abs(q - self._r @ x) ** 2).sum())
            best = min(best, cost)
        return best

    def _search(self, q, cand_labels, seed):
        """Depth-first sphere search; returns (min cost, label assignment).

        seed is an achievable upper bound (or inf); equal-cost paths are
        pruned, so the returned labels are only valid when the result
        improves on the seed.
        """
        c = self.constellation
        r = self._r
        d = self.dim
        best = float(seed)
        best_labels = np.full(d, -1, dtype=np.int64)
        cur = np.zeros(d, dtype=np.int64)
        partial = np.zeros(d, dtype=complex)

        def descend(level: int, acc: float):
            nonlocal best
            labs = cand_labels[level]
            images = self._diag_images[level, labs]
            costs = np.abs((q[level] - partial[level]) - images) ** 2
            order = np.argsort(costs)
            for t in order:
                total = acc + costs[t]
                if total >= best:
                    return
                cur[level] = labs[t]
                if level == 0:
                    best = total
                    best_labels[:] = cur
                else:
                    x = c.points[labs[t]]
                    delta = r[:level, level] * x
                    partial[:level] += delta
                    descend(level - 1, total)
                    partial[:level] -= delta

        descend(d - 1, 0.0)
        return best, best_labels
