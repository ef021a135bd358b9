"""Monte Carlo link simulation over block-fading distributed-subarray channels.

One frame = one channel realization carrying a whole interleaved coded
block.  Frames are reproducible in isolation: frame k of SNR point i uses
np.random.default_rng([master_seed, 1, i, k]), so results are identical
for any worker count or batch schedule.  Points stop at a batch boundary
once the bit-error or frame budget is reached.
"""
from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .beamforming import is_degenerate, noise_variance
from .channel_model import ArrayGeometry, assemble_channel
from .detector import MetricEngine, group_columns
from .fec import Interleaver, QamConstellation, conv_encode, viterbi_decode_batch
from .pstbc import SUPPORTED_DIMS, build_params, encode_batch, omega_matrix

N_TAIL = 6
_RESAMPLE_CAP = 1000


def _grid(values) -> tuple:
    rows = tuple(tuple(row) for row in np.asarray(values).tolist())
    if not rows or not all(len(r) == len(rows[0]) for r in rows):
        raise ValueError("grid rows must be nonempty and equal length")
    return rows


@dataclass(frozen=True)
class SystemConfig:
    """Full description of one simulated link; hashable and serializable."""

    n_t: int = 16
    n_r: int = 8
    l_t: int = 2
    l_r: int = 2
    dim: int = 2
    beta: tuple = ((0.01, 0.01), (0.01, 0.01))
    n_paths: tuple = ((2, 2), (2, 2))
    constellation_order: int = 16
    nominal_info_bits: int = 1024
    master_seed: int = 0
    spacing: float = 0.5
    batch_frames: int = 64
    max_frames: int = 20000
    target_bit_errors: int = 200

    def __post_init__(self):
        object.__setattr__(self, "beta", _grid(self.beta))
        paths = np.asarray(self.n_paths)
        if paths.ndim == 0:
            paths = np.full((self.l_r, self.l_t), int(paths))
        object.__setattr__(self, "n_paths", _grid(paths))
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"dim must be one of {SUPPORTED_DIMS}")
        geom = self.geometry  # validates antenna counts
        if self.dim > min(geom.total_tx, geom.total_rx):
            raise ValueError("dim exceeds the antenna dimensions")
        b = np.asarray(self.beta, dtype=float)
        p = np.asarray(self.n_paths)
        if b.shape != (self.l_r, self.l_t) or p.shape != b.shape:
            raise ValueError("beta and n_paths must be (l_r, l_t) grids")
        if (b < 0).any() or b.sum() == 0:
            raise ValueError("beta must be nonnegative with a positive sum")
        if (p < 1).any() or p.dtype.kind not in "iu":
            raise ValueError("n_paths must be positive integers")
        if self.dim > int(p[b > 0].sum()):
            raise ValueError("channel rank cannot support this many streams")
        if self.constellation_order not in (4, 16):
            raise ValueError("constellation_order must be 4 or 16")
        if self.n_info < 1:
            raise ValueError("nominal_info_bits too small for one codeword")
        for name in ("batch_frames", "max_frames", "target_bit_errors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(n_t=self.n_t, n_r=self.n_r, l_t=self.l_t,
                             l_r=self.l_r, spacing=self.spacing)

    @property
    def bits_per_symbol(self) -> int:
        return 4 if self.constellation_order == 16 else 2

    @property
    def n_info(self) -> int:
        """Largest info length <= nominal filling whole codewords with tail."""
        step = self.bits_per_symbol * self.dim ** 2 // 2
        usable = (self.nominal_info_bits + N_TAIL) // step * step
        return usable - N_TAIL

    @property
    def n_coded(self) -> int:
        return 2 * (self.n_info + N_TAIL)

    @property
    def n_symbols(self) -> int:
        return self.n_coded // self.bits_per_symbol

    @property
    def n_codewords(self) -> int:
        return self.n_symbols // self.dim ** 2

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_hash(config: SystemConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class PointResult:
    snr_db: float
    frames: int
    info_bits: int
    bit_errors: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else 0.0


class _FramePipeline:
    """Per-config precomputed state shared by every frame."""

    def __init__(self, config: SystemConfig):
        self.config = config
        self.params = build_params(config.dim)
        self.constellation = QamConstellation(config.constellation_order)
        self.geom = config.geometry
        self.ivl = Interleaver(config.n_coded, seed=config.master_seed)
        d = config.dim
        bps = self.constellation.bits_per_symbol
        # interleaved bit k -> (codeword group, symbol position, bit slot)
        k = np.arange(config.n_coded)
        s = k // bps
        self.bit_j = k % bps
        cw, p = divmod(s, d * d)
        v, m = divmod(p, d)
        self.group_idx = cw * d + v
        self.pos_idx = m
        self.deint_rows = self.ivl.deinterleave(np.arange(config.n_coded))
        self.beta = np.asarray(config.beta, dtype=float)
        self.paths = np.asarray(config.n_paths)
        self.weights_conj = np.stack(
            [omega_matrix(self.params, v + 1).diagonal() for v in range(d)]
        ).conj()
        self.gcols = group_columns(d)
        self.grows = np.arange(d)[None, :]
        if d <= 3:
            kk = self.constellation.order
            grids = np.meshgrid(*([np.arange(kk)] * d), indexing="ij")
            self.cands = self.constellation.points[
                np.stack([g.ravel() for g in grids])]
        else:
            self.cands = None

    def frame_rng(self, snr_index: int, frame_index: int) -> np.random.Generator:
        return np.random.default_rng(
            [self.config.master_seed, 1, snr_index, frame_index])

    def run_batch(self, snr_db: float, snr_index: int, frame_start: int,
                  n_frames: int, noiseless: bool = False):
        """Simulate frames [frame_start, frame_start + n_frames).

        Returns (info_bits_total, bit_errors_total).
        """
        cfg = self.config
        d = cfg.dim
        n0 = 0.0 if noiseless else noise_variance(self.geom.total_tx, snr_db)
        rngs = [self.frame_rng(snr_index, frame_start + i) for i in range(n_frames)]

        info = np.stack([r.integers(0, 2, cfg.n_info) for r in rngs]).astype(np.uint8)
        padded = np.pad(info, ((0, 0), (0, N_TAIL)))
        coded = np.stack([conv_encode(row) for row in padded])
        inter = coded[:, self.ivl.permutation]
        symbols = np.stack([self.constellation.map_bits(row) for row in inter])
        x = symbols.reshape(n_frames, cfg.n_codewords, d, d)

        lam = np.empty((n_frames, d))
        chans = [assemble_channel(r, self.geom, self.beta, self.paths) for r in rngs]
        sv = np.linalg.svd(np.stack(chans), compute_uv=False)
        for i in range(n_frames):
            lam[i] = sv[i, :d]
            tries = 0
            while is_degenerate(lam[i]):
                tries += 1
                if tries > _RESAMPLE_CAP:
                    raise RuntimeError("channel rank starved; check beta/n_paths")
                h = assemble_channel(rngs[i], self.geom, self.beta, self.paths)
                lam[i] = np.linalg.svd(h, compute_uv=False)[:d]

        z = encode_batch(self.params, x)
        y = lam[:, None, :, None] * z
        if n0 > 0:
            re = np.stack([r.standard_normal(z[0].shape + (2,)) for r in rngs])
            y = y + np.sqrt(n0 / 2.0) * (re[..., 0] + 1j * re[..., 1])
        groups = (self.weights_conj * y[:, :, self.grows, self.gcols]).reshape(
            n_frames, cfg.n_codewords * d, d)

        if d <= 3:
            gamma = self._metrics_batched(lam, groups)
        else:
            gamma = np.empty((n_frames, cfg.n_codewords * d, d,
                              self.constellation.bits_per_symbol, 2))
            for i in range(n_frames):
                eng = MetricEngine(self.params, self.constellation, lam[i])
                gamma[i] = eng.bit_metrics(groups[i]).gamma

        pairs = gamma[:, self.group_idx, self.pos_idx, self.bit_j, :]
        decoded = viterbi_decode_batch(pairs[:, self.deint_rows, :])
        errors = int((decoded != info).sum())
        return n_frames * cfg.n_info, errors

    def _metrics_batched(self, lam, groups):
        """Vectorized exhaustive subset minima across frames and groups."""
        c = self.constellation
        d = self.config.dim
        kk = c.order
        n_frames, n_groups, _ = groups.shape
        q, r = qr_reduce_stack(lam[:, :, None] * self.params.generator)
        qobs = np.einsum("fij,fgj->fgi", q.conj().transpose(0, 2, 1), groups)
        images = np.einsum("fij,jc->fic", r, self.cands)
        cross = np.einsum("fgi,fic->fgc", qobs, images.conj()).real
        dists = (np.abs(qobs) ** 2).sum(-1)[:, :, None] \
            + (np.abs(images) ** 2).sum(1)[:, None, :] - 2.0 * cross
        dists = dists.reshape((n_frames, n_groups) + d * (kk,))
        gamma = np.empty((n_frames, n_groups, d, c.bits_per_symbol, 2))
        axes = tuple(range(2, d + 2))
        for m in range(d):
            reduce_over = tuple(a for a in axes if a != m + 2)
            per_label = dists.min(axis=reduce_over)
            for j in range(c.bits_per_symbol):
                for b in (0, 1):
                    gamma[:, :, m, j, b] = per_label[
                        :, :, c.subset_indices[j, b]].min(axis=2)
        return gamma


def qr_reduce_stack(m: np.ndarray):
    """Stacked qr_reduce: (f, d, d) -> Q, R with nonnegative real R diagonal."""
    q, r = np.linalg.qr(m)
    d = r.shape[-1]
    idx = np.arange(d)
    piv = r[:, idx, idx]
    mag = np.abs(piv)
    rot = np.where(mag > 0, np.conj(piv) / np.where(mag > 0, mag, 1.0), 1.0)
    r *= rot[:, :, None]
    q *= rot.conj()[:, None, :]
    return q, r


def _batch_worker(config: SystemConfig, snr_db: float, snr_index: int,
                  frame_start: int, n_frames: int, noiseless: bool):
    pipe = _FramePipeline(config)
    return pipe.run_batch(snr_db, snr_index, frame_start, n_frames, noiseless)


def run_ber_point(config: SystemConfig, snr_db: float, snr_index: int = 0,
                  workers: int = 1, noiseless: bool = False,
                  pipeline: _FramePipeline | None = None) -> PointResult:
    """Accumulate batches until the error or frame budget is met.

    The stop rule is evaluated on cumulative counts in batch order, so the
    result is byte-identical for any worker count.
    """
    if workers < 1:
        raise ValueError("workers must be positive")
    bsz = config.batch_frames
    frames = info_bits = errors = 0

    def _spans():
        start = 0
        while True:
            yield start, bsz
            start += bsz

    spans = _spans()
    results = []

    def _absorb(res):
        nonlocal frames, info_bits, errors
        nfo, err = res
        frames_here = nfo // config.n_info
        results.append((frames_here, nfo, err))
        frames += frames_here
        info_bits += nfo
        errors += err
        return errors >= config.target_bit_errors or frames >= config.max_frames

    if workers == 1:
        pipe = pipeline if pipeline is not None else _FramePipeline(config)
        while True:
            start, n = next(spans)
            if _absorb(pipe.run_batch(snr_db, snr_index, start, n, noiseless)):
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = False
            while not done:
                futs = []
                for _ in range(workers):
                    start, n = next(spans)
                    futs.append(pool.submit(_batch_worker, config, snr_db,
                                            snr_index, start, n, noiseless))
                for fut in futs:            # in submission order
                    if done:
                        fut.result()        # completed speculatively; discard
                        continue
                    done = _absorb(fut.result())

    return PointResult(snr_db=snr_db, frames=frames, info_bits=info_bits,
                       bit_errors=errors)


def run_sweep(config: SystemConfig, snr_grid, workers: int = 1,
              noiseless: bool = False) -> list[PointResult]:
    grid = [float(s) for s in np.atleast_1d(np.asarray(snr_grid, dtype=float))]
    if not grid:
        raise ValueError("empty SNR grid")
    pipe = _FramePipeline(config) if workers == 1 else None
    return [run_ber_point(config, s, i, workers, noiseless, pipeline=pipe)
            for i, s in enumerate(grid)]


def write_csv(path, results: list[PointResult], cfg_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["snr_db", "frames", "info_bits", "bit_errors", "ber"])
        for r in results:
            writer.writerow([f"{r.snr_db:.6f}", r.frames, r.info_bits,
                             r.bit_errors, f"{r.ber:.10e}"])


def read_csv(path):
    """Returns (config_hash or None, list of PointResult)."""
    with open(path) as fh:
        first = fh.readline().strip()
        stored = first.split("=", 1)[1] if first.startswith("# config_hash=") else None
        if stored is None:
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    results = [PointResult(snr_db=float(r["snr_db"]), frames=int(r["frames"]),
                           info_bits=int(r["info_bits"]),
                           bit_errors=int(r["bit_errors"])) for r in rows]
    return stored, results


def awgn_uncoded_ber(seed: int, snr_symbol_db: float, n_symbols: int,
                     order: int = 16) -> float:
    """Gray-labeled hard-decision QAM over scalar AWGN, for calibration."""
    if n_symbols < 1:
        raise ValueError("n_symbols must be positive")
    c = QamConstellation(order)
    rng = np.random.default_rng([seed, 2])
    bps = c.bits_per_symbol
    bits = rng.integers(0, 2, n_symbols * bps).astype(np.uint8)
    sent = c.map_bits(bits)
    n0 = 10.0 ** (-snr_symbol_db / 10.0)
    noise = np.sqrt(n0 / 2.0) * (rng.standard_normal(n_symbols)
                                 + 1j * rng.standard_normal(n_symbols))
    received = sent + noise
    labels = np.empty(n_symbols, dtype=np.int64)
    for lo in range(0, n_symbols, 262_144):
        block = received[lo:lo + 262_144]
        labels[lo:lo + block.size] = np.abs(
            block[:, None] - c.points[None, :]).argmin(axis=1)
    shifts = np.arange(bps - 1, -1, -1)
    got = ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return float((got != bits).mean())
