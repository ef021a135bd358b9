"""Clustered mm-wave channel with distributed antenna subarrays.

Each transmit subarray j and receive subarray i sees its own sparse
multipath block H_ij built from n_paths planar-wave components with
uniform angles and CN(0,1) gains, scaled so E||H_ij||_F^2 = n_t * n_r.
Large-scale gains beta[i, j] weight the blocks of the stacked channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear subarrays, antenna spacing in wavelengths."""

    n_t: int
    n_r: int
    l_t: int
    l_r: int
    spacing: float = 0.5

    def __post_init__(self):
        for name in ("n_t", "n_r", "l_t", "l_r"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 < self.spacing:
            raise ValueError("spacing must be positive")

    @property
    def total_tx(self) -> int:
        return self.n_t * self.l_t

    @property
    def total_rx(self) -> int:
        return self.n_r * self.l_r


def array_response(n: int, angle, spacing: float = 0.5) -> np.ndarray:
    """Unit-norm ULA steering vector(s); angle may be scalar or array.

    Element k carries phase 2*pi*spacing*k*sin(angle); output shape is
    angle.shape + (n,) for array input, (n,) for a scalar.
    """
    if n < 1:
        raise ValueError("n must be positive")
    ang = np.asarray(angle, dtype=float)
    k = np.arange(n)
    phase = 2j * np.pi * spacing * np.multiply.outer(np.sin(ang), k)
    return np.exp(phase) / np.sqrt(n)


def _draw_block(rng: np.random.Generator, n_paths: int):
    """Per-block path parameters, fixed draw order: AoA, AoD, gain."""
    aoa = rng.uniform(0.0, 2.0 * np.pi, n_paths)
    aod = rng.uniform(0.0, 2.0 * np.pi, n_paths)
    alpha = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2.0)
    return aoa, aod, alpha


def gen_subchannel(rng: np.random.Generator, geom: ArrayGeometry, n_paths: int) -> np.ndarray:
    """One (n_r, n_t) block, no large-scale gain applied."""
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    aoa, aod, alpha = _draw_block(rng, n_paths)
    a_r = array_response(geom.n_r, aoa, geom.spacing)      # (L, n_r)
    a_t = array_response(geom.n_t, aod, geom.spacing)      # (L, n_t)
    scale = np.sqrt(geom.n_t * geom.n_r / n_paths)
    return scale * np.einsum("l,lr,lt->rt", alpha, a_r, a_t.conj())


def _check_beta(beta, geom: ArrayGeometry) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    if b.shape != (geom.l_r, geom.l_t):
        raise ValueError(f"beta must have shape ({geom.l_r}, {geom.l_t})")
    if not np.isfinite(b).all() or (b < 0).any():
        raise ValueError("beta entries must be finite and nonnegative")
    return b


def _check_paths(n_paths, geom: ArrayGeometry) -> np.ndarray:
    """Scalar or per-block grid of path counts, as an int grid."""
    p = np.asarray(n_paths)
    if p.ndim == 0:
        p = np.full((geom.l_r, geom.l_t), int(p))
    if p.shape != (geom.l_r, geom.l_t):
        raise ValueError(f"n_paths must be scalar or shaped ({geom.l_r}, {geom.l_t})")
    if not np.issubdtype(p.dtype, np.integer) or (p < 1).any():
        raise ValueError("path counts must be positive integers")
    return p.astype(int)


def assemble_channel(rng: np.random.Generator, geom: ArrayGeometry, beta,
                     n_paths) -> np.ndarray:
    """Stacked (l_r*n_r, l_t*n_t) channel; blocks drawn in row-major order.

    n_paths may be a scalar or an (l_r, l_t) grid of per-block counts.
    """
    b = _check_beta(beta, geom)
    p = _check_paths(n_paths, geom)
    h = np.zeros((geom.total_rx, geom.total_tx), dtype=complex)
    for i in range(geom.l_r):
        for j in range(geom.l_t):
            block = gen_subchannel(rng, geom, p[i, j])
            h[i * geom.n_r:(i + 1) * geom.n_r,
              j * geom.n_t:(j + 1) * geom.n_t] = np.sqrt(b[i, j]) * block
    return h


def theta_samples(rng: np.random.Generator, geom: ArrayGeometry, beta,
                  n_paths, n_samples: int) -> np.ndarray:
    """Draws of the squared Frobenius norm sum_ij beta_ij ||H_ij||^2.

    Uses the path-domain Gram identity instead of forming the blocks, so
    large arrays cost O(L^2) per block.  Draw order matches
    assemble_channel, so with a shared seed sample 0 equals the norm of
    the assembled matrix.
    """
    b = _check_beta(beta, geom)
    p = _check_paths(n_paths, geom)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    out = np.empty(n_samples)
    for s in range(n_samples):
        total = 0.0
        for i in range(geom.l_r):
            for j in range(geom.l_t):
                scale = geom.n_t * geom.n_r / p[i, j]
                aoa, aod, alpha = _draw_block(rng, p[i, j])
                a_r = array_response(geom.n_r, aoa, geom.spacing)
                a_t = array_response(geom.n_t, aod, geom.spacing)
                g_r = a_r.conj() @ a_r.T                   # g_r[l, m] = a_l^H a_m
                g_t = a_t.conj() @ a_t.T
                quad = np.einsum("l,m,lm,ml->", alpha.conj(), alpha, g_r, g_t)
                total += b[i, j] * scale * quad.real
        out[s] = total
    return out


def channel_svd(h: np.ndarray, d: int):
    """Leading d singular triplets with a deterministic phase convention.

    Returns (lam, f, w): lam nonincreasing, f the (total_tx, d) right and
    w the (total_rx, d) left singular vectors, each pair rotated so the
    first element of the right vector above 1e-12 in magnitude is real
    positive.  Then w^H @ h @ f = diag(lam).
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise ValueError("h must be a matrix")
    if not 1 <= d <= min(h.shape):
        raise ValueError("d out of range")
    u, s, vh = np.linalg.svd(h, full_matrices=False)
    w = u[:, :d].copy()
    f = vh[:d].conj().T.copy()
    lam = s[:d].copy()
    for k in range(d):
        col = f[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size == 0:
            continue
        rot = np.abs(col[idx[0]]) / col[idx[0]]
        f[:, k] = col * rot
        w[:, k] = w[:, k] * rot
    return lam, f, w
