"""Command line front end: BER sweeps, curve analysis, self checks.

Config files are flat key = value lines matching SystemConfig fields.
Grids (beta, n_paths) use semicolon-separated rows, e.g.

    beta = 0.01 0.01; 0.01 0.01
    n_paths = 6 2; 3 1

Exit codes: 0 success, 1 failed checks or bad inputs, 2 usage errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from fractions import Fraction

import numpy as np

from .analysis import empirical_slope, welch_satterthwaite, zeta_min
from .detector import MetricEngine, group_decompose
from .fec import Interleaver, QamConstellation, conv_encode, free_distance, viterbi_decode
from .pstbc import SUPPORTED_DIMS, build_params, encode
from .sim_engine import (
    SystemConfig,
    config_hash,
    read_csv,
    run_ber_point,
    run_sweep,
    write_csv,
)

_INT_FIELDS = {"n_t", "n_r", "l_t", "l_r", "dim", "constellation_order",
               "nominal_info_bits", "master_seed", "batch_frames",
               "max_frames", "target_bit_errors"}
_FLOAT_FIELDS = {"spacing"}
_GRID_FIELDS = {"beta", "n_paths"}


def _parse_grid(text: str, as_int: bool):
    rows = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            raise ValueError("empty grid row")
        rows.append(tuple(int(p) if as_int else float(p) for p in parts))
    return tuple(rows)


def load_config(path: str, seed_override: int | None = None) -> SystemConfig:
    values = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key in _INT_FIELDS:
                values[key] = int(val)
            elif key in _FLOAT_FIELDS:
                values[key] = float(val)
            elif key in _GRID_FIELDS:
                values[key] = _parse_grid(val, as_int=(key == "n_paths"))
            else:
                raise ValueError(f"{path}:{ln}: unknown key '{key}'")
    if seed_override is not None:
        values["master_seed"] = seed_override
    return SystemConfig(**values)


def _snr_grid(args) -> np.ndarray:
    if args.snr_step <= 0:
        raise ValueError("--snr-step must be positive")
    if args.snr_max < args.snr_min:
        raise ValueError("--snr-max must be >= --snr-min")
    n = int(round((args.snr_max - args.snr_min) / args.snr_step)) + 1
    grid = args.snr_min + args.snr_step * np.arange(n)
    return grid[grid <= args.snr_max + 1e-9]


def _cmd_sweep(args) -> int:
    config = load_config(args.config, args.seed)
    grid = _snr_grid(args)
    results = run_sweep(config, grid, workers=args.workers)
    write_csv(args.out, results, config_hash(config))
    for r in results:
        print(f"snr {r.snr_db:6.2f} dB  frames {r.frames:6d}  "
              f"errors {r.bit_errors:6d}  ber {r.ber:.4e}")
    print(f"wrote {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    config = load_config(args.config)
    stored, results = read_csv(args.results)
    expected = config_hash(config)
    if stored != expected and not args.force:
        print(f"config hash mismatch: csv has {stored}, config gives {expected}",
              file=sys.stderr)
        print("pass --force to analyze anyway", file=sys.stderr)
        return 1
    if args.exact_ratios:
        beta = [[Fraction(str(b)) for b in row] for row in config.beta]
    else:
        beta = np.asarray(config.beta, dtype=float)
    kappa, theta = welch_satterthwaite(beta, np.asarray(config.n_paths))
    params = build_params(config.dim)
    zeta = zeta_min(params, QamConstellation(config.constellation_order))
    print(f"kappa (diversity order): {kappa}")
    print(f"theta (gamma scale):     {theta}")
    print(f"zeta_min:                {zeta:.6g}")
    snr = np.array([r.snr_db for r in results])
    ber = np.array([r.ber for r in results])
    usable = ber > 0
    if usable.sum() >= 2:
        slope = empirical_slope(snr[usable], ber[usable])
        print(f"empirical slope:         {slope:.3f} (per 10 dB)")
        print(f"slope / kappa:           {slope / float(kappa):.3f}")
    else:
        print("empirical slope:         not enough positive BER points")
    return 0


def _selftest_checks(params_by_dim, verbose=True):
    failures = []

    def check(name, ok):
        if verbose:
            print(f"{'ok  ' if ok else 'FAIL'} {name}")
        if not ok:
            failures.append(name)

    rng = np.random.default_rng(0)
    for d, params in params_by_dim.items():
        gg = params.generator @ params.generator.conj().T
        check(f"generator unitary (d={d})", np.abs(gg - np.eye(d)).max() < 1e-12)
        ed = np.linalg.matrix_power(params.shift, d)
        check(f"shift identity (d={d})", np.abs(ed - params.g * np.eye(d)).max() < 1e-12)
        x = rng.standard_normal((20, d, d)) + 1j * rng.standard_normal((20, d, d))
        worst = max(abs(np.linalg.norm(encode(params, xi).z) - np.linalg.norm(xi))
                    for xi in x)
        check(f"codeword energy preserved (d={d})", worst < 1e-10)

    check("free distance = 10", free_distance() == 10)

    ivl = Interleaver(256, seed=7)
    bits = rng.integers(0, 2, 256).astype(np.uint8)
    check("interleaver round trip",
          np.array_equal(ivl.deinterleave(ivl.interleave(bits)), bits))

    info = rng.integers(0, 2, 58).astype(np.uint8)
    coded = conv_encode(np.concatenate([info, np.zeros(6, dtype=np.uint8)]))
    metrics = np.zeros((coded.size, 2))
    metrics[np.arange(coded.size), 1 - coded] = 1.0
    check("viterbi clean loopback", np.array_equal(viterbi_decode(metrics), info))

    c = QamConstellation(16)
    check("constellation unit energy",
          abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12)

    params = params_by_dim[2]
    lam = np.array([2.0, 1.0])
    labels = rng.integers(0, 16, (2, 2))
    x = c.points[labels]
    z = encode(params, x).z
    groups = group_decompose(lam[:, None] * z, params)
    out = MetricEngine(params, c, lam).bit_metrics(groups)
    hit = all(out.gamma[v, m, j, c.qam_bit_label(int(labels[v, m]), j)] < 1e-12
              for v in range(2) for m in range(2) for j in range(4))
    check("noiseless group metrics vanish", hit and np.allclose(out.umin, 0, atol=1e-12))

    cfg = SystemConfig(nominal_info_bits=128, batch_frames=2, max_frames=2,
                       target_bit_errors=1)
    res = run_ber_point(cfg, snr_db=0.0, noiseless=True)
    check("noiseless link loopback", res.bit_errors == 0)
    return failures


def _cmd_selftest(args) -> int:
    params_by_dim = {d: build_params(d) for d in SUPPORTED_DIMS}
    if args.corrupt_generator:
        # negative control: a perturbed generator must trip the checks
        bad = params_by_dim[2]
        g = bad.generator.copy()
        g[0, 0] *= 1.001
        g.setflags(write=False)
        params_by_dim[2] = dataclasses.replace(bad, generator=g)
    failures = _selftest_checks(params_by_dim)
    if failures:
        print(f"{len(failures)} check(s) failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bicmb-pc",
        description="BER sweeps and diversity analysis for coded multiple "
                    "beamforming with perfect space-time codes")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a Monte Carlo BER sweep")
    sweep.add_argument("--config", required=True, help="flat key=value config file")
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.add_argument("--snr-min", type=float, required=True)
    sweep.add_argument("--snr-max", type=float, required=True)
    sweep.add_argument("--snr-step", type=float, default=1.0)
    sweep.add_argument("--seed", type=int, default=None,
                       help="override master_seed from the config")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.set_defaults(func=_cmd_sweep)

    analyze = sub.add_parser("analyze", help="diversity report for a sweep CSV")
    analyze.add_argument("results", help="CSV produced by sweep")
    analyze.add_argument("--config", required=True)
    analyze.add_argument("--force", action="store_true",
                         help="analyze even if the config hash mismatches")
    analyze.add_argument("--exact-ratios", action="store_true",
                         help="treat beta as integer ratios for exact kappa")
    analyze.set_defaults(func=_cmd_analyze)

    selftest = sub.add_parser("selftest", help="fast invariant checks")
    selftest.add_argument("--corrupt-generator", action="store_true",
                          help=argparse.SUPPRESS)
    selftest.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
