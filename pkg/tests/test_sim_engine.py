import numpy as np
import pytest

from bicmb_pc.detector import MetricEngine
from bicmb_pc.fec import QamConstellation
from bicmb_pc.pstbc import build_params
from bicmb_pc.sim_engine import (
    PointResult,
    SystemConfig,
    _FramePipeline,
    awgn_uncoded_ber,
    config_hash,
    qr_reduce_stack,
    read_csv,
    run_ber_point,
    run_sweep,
    write_csv,
)

SMALL = SystemConfig(nominal_info_bits=128, batch_frames=8, max_frames=16,
                     target_bit_errors=50)


def test_effective_info_bits_per_dim():
    assert SystemConfig(dim=2).n_info == 1018
    assert SystemConfig(dim=3).n_info == 1020
    assert SystemConfig(dim=4).n_info == 1018
    assert SystemConfig(dim=6, n_t=16, n_r=8).n_info == 1002
    qpsk = SystemConfig(dim=2, constellation_order=4)
    assert qpsk.n_info == 1022
    assert qpsk.n_symbols == qpsk.n_codewords * 4


def test_frame_partitions_are_consistent():
    for cfg in (SystemConfig(dim=2), SystemConfig(dim=3), SMALL):
        assert cfg.n_coded == 2 * (cfg.n_info + 6)
        assert cfg.n_coded % cfg.bits_per_symbol == 0
        assert cfg.n_symbols % cfg.dim ** 2 == 0
        assert cfg.n_codewords >= 1


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(dim=5)
    with pytest.raises(ValueError):
        SystemConfig(dim=6, n_t=1, n_r=1, l_t=2, l_r=2)
    with pytest.raises(ValueError):
        SystemConfig(beta=((1.0,),))
    with pytest.raises(ValueError):
        SystemConfig(beta=((0.0, 0.0), (0.0, 0.0)))
    with pytest.raises(ValueError):
        SystemConfig(n_paths=((2.5, 2), (2, 2)))
    with pytest.raises(ValueError):
        SystemConfig(constellation_order=64)
    with pytest.raises(ValueError):
        SystemConfig(nominal_info_bits=1)
    with pytest.raises(ValueError):
        # rank starved: one single-path block cannot carry two streams
        SystemConfig(beta=((1.0, 0.0), (0.0, 0.0)), n_paths=((1, 2), (2, 2)))


def test_scalar_n_paths_broadcast():
    cfg = SystemConfig(n_paths=2)
    assert cfg.n_paths == ((2, 2), (2, 2))


def test_config_hash_tracks_content():
    a = config_hash(SystemConfig())
    b = config_hash(SystemConfig())
    c = config_hash(SystemConfig(master_seed=1))
    assert a == b
    assert a != c
    assert len(a) == 64


def test_qr_reduce_stack_properties():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((4, 3, 3)) + 1j * rng.standard_normal((4, 3, 3))
    q, r = qr_reduce_stack(m)
    for i in range(4):
        assert np.allclose(q[i] @ r[i], m[i], atol=1e-12)
        diag = r[i].diagonal()
        assert np.allclose(diag.imag, 0, atol=1e-13)
        assert (diag.real >= 0).all()


def test_batched_metrics_match_metric_engine():
    cfg = SMALL
    pipe = _FramePipeline(cfg)
    rng = np.random.default_rng(11)
    n_frames, n_groups = 3, cfg.n_codewords * cfg.dim
    lam = np.sort(rng.uniform(0.5, 3.0, (n_frames, cfg.dim)), axis=1)[:, ::-1]
    groups = rng.standard_normal((n_frames, n_groups, cfg.dim)) \
        + 1j * rng.standard_normal((n_frames, n_groups, cfg.dim))
    batched = pipe._metrics_batched(lam, groups)
    params = build_params(cfg.dim)
    c = QamConstellation(cfg.constellation_order)
    for i in range(n_frames):
        ref = MetricEngine(params, c, lam[i]).bit_metrics(groups[i]).gamma
        assert np.allclose(batched[i], ref, atol=1e-9)


@pytest.mark.parametrize("dim", [2, 3, 4, 6])
def test_noiseless_loopback_is_error_free(dim):
    cfg = SystemConfig(dim=dim, nominal_info_bits=144, batch_frames=2,
                       max_frames=4, target_bit_errors=1)
    res = run_ber_point(cfg, snr_db=0.0, noiseless=True)
    assert res.bit_errors == 0
    assert res.frames == 4
    assert res.ber == 0.0


def test_noisy_point_reports_counts():
    res = run_ber_point(SMALL, snr_db=5.0)
    assert res.frames in (8, 16)
    assert res.info_bits == res.frames * SMALL.n_info
    assert 0 <= res.bit_errors <= res.info_bits
    assert res.ber == res.bit_errors / res.info_bits


def test_runs_are_deterministic():
    a = run_ber_point(SMALL, snr_db=6.0)
    b = run_ber_point(SMALL, snr_db=6.0)
    assert (a.frames, a.info_bits, a.bit_errors) == (b.frames, b.info_bits, b.bit_errors)
    other = SystemConfig(nominal_info_bits=128, batch_frames=8, max_frames=16,
                         target_bit_errors=50, master_seed=9)
    c = run_ber_point(other, snr_db=6.0)
    assert (a.bit_errors, a.frames) != (c.bit_errors, c.frames) or a.bit_errors != c.bit_errors


def test_worker_count_does_not_change_results():
    serial = run_ber_point(SMALL, snr_db=6.0, snr_index=0, workers=1)
    parallel = run_ber_point(SMALL, snr_db=6.0, snr_index=0, workers=2)
    assert (serial.frames, serial.info_bits, serial.bit_errors) == \
        (parallel.frames, parallel.info_bits, parallel.bit_errors)


def test_stop_rules():
    # noiseless -> zero errors -> runs to the frame cap
    cfg = SystemConfig(nominal_info_bits=128, batch_frames=4, max_frames=8,
                       target_bit_errors=1)
    res = run_ber_point(cfg, snr_db=0.0, noiseless=True)
    assert res.frames == 8
    # very low SNR -> error budget met in the first batch
    eager = SystemConfig(nominal_info_bits=128, batch_frames=4, max_frames=400,
                         target_bit_errors=5)
    res2 = run_ber_point(eager, snr_db=-20.0)
    assert res2.frames == 4
    assert res2.bit_errors >= 5


def test_sweep_and_csv_round_trip(tmp_path):
    results = run_sweep(SMALL, [4.0, 8.0])
    assert [r.snr_db for r in results] == [4.0, 8.0]
    h = config_hash(SMALL)
    path = tmp_path / "sweep.csv"
    write_csv(path, results, h)
    stored, loaded = read_csv(path)
    assert stored == h
    for got, ref in zip(loaded, results):
        assert (got.snr_db, got.frames, got.info_bits, got.bit_errors) == \
            (ref.snr_db, ref.frames, ref.info_bits, ref.bit_errors)
    # byte-identical on rewrite
    path2 = tmp_path / "sweep2.csv"
    write_csv(path2, results, h)
    assert path.read_bytes() == path2.read_bytes()
    with pytest.raises(ValueError):
        run_sweep(SMALL, [])


def test_awgn_calibration_quick():
    # 16-QAM Gray closed form at gamma_s = 14 dB
    from math import erfc, sqrt

    def qfunc(x):
        return 0.5 * erfc(x / sqrt(2.0))

    snr_db = 14.0
    g = 10 ** (snr_db / 10)
    u = sqrt(g / 5.0)
    ref = 0.25 * (3 * qfunc(u) + 2 * qfunc(3 * u) - qfunc(5 * u))
    sim = awgn_uncoded_ber(seed=3, snr_symbol_db=snr_db, n_symbols=400_000)
    assert sim == pytest.approx(ref, rel=0.05)


def test_point_result_ber_property():
    r = PointResult(snr_db=10.0, frames=2, info_bits=1000, bit_errors=5)
    assert r.ber == 0.005
