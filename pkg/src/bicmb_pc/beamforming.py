"""SVD transmit/receive beamforming and the reduced channel model.

With F and W the leading right/left singular vectors of H, the combined
observation of a codeword Z is W^H (H F Z + N) = diag(lam) Z + W^H N, and
W^H N keeps the white CN(0, n0) statistics because W has orthonormal
columns.  Noise level follows n0 = total_tx / snr.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import channel_svd


@dataclass(frozen=True, eq=False)
class Beamformers:
    lam: np.ndarray     # (d,) singular values, nonincreasing
    f: np.ndarray       # (total_tx, d) precoder
    w: np.ndarray       # (total_rx, d) combiner

    @property
    def n_streams(self) -> int:
        return self.lam.shape[0]


def svd_beamformers(h: np.ndarray, d: int) -> Beamformers:
    lam, f, w = channel_svd(h, d)
    for arr in (lam, f, w):
        arr.setflags(write=False)
    return Beamformers(lam=lam, f=f, w=w)


def is_degenerate(lam: np.ndarray, rel_tol: float = 1e-12) -> bool:
    """True when the weakest stream is numerically dead."""
    lam = np.asarray(lam)
    return bool(lam[-1] <= rel_tol * lam[0])


def noise_variance(total_tx: int, snr_db: float) -> float:
    if total_tx < 1:
        raise ValueError("total_tx must be positive")
    return total_tx / (10.0 ** (snr_db / 10.0))


def cn_noise(rng: np.random.Generator, shape, n0: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian, variance n0 per entry."""
    if n0 < 0:
        raise ValueError("n0 must be nonnegative")
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(n0 / 2.0) * (re + 1j * im)


def transmit(rng: np.random.Generator, bf: Beamformers, z: np.ndarray,
             n0: float) -> np.ndarray:
    """Reduced-model observation diag(lam) Z + CN(0, n0) noise."""
    z = np.asarray(z)
    d = bf.n_streams
    if z.shape != (d, d):
        raise ValueError(f"codeword must be ({d}, {d})")
    return bf.lam[:, None] * z + cn_noise(rng, (d, d), n0)


def transmit_full(rng: np.random.Generator, h: np.ndarray, bf: Beamformers,
                  z: np.ndarray, n0: float) -> np.ndarray:
    """Full-model observation W^H (H F Z + N); equals the reduced model
    when the same noise image is used."""
    z = np.asarray(z)
    d = bf.n_streams
    if z.shape != (d, d):
        raise ValueError(f"codeword must be ({d}, {d})")
    noise = cn_noise(rng, (h.shape[0], d), n0)
    return bf.w.conj().T @ (h @ bf.f @ z + noise)
