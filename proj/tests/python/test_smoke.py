import json

import numpy as np
import pytest

import ibsmamp


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x / np.sqrt(n)


def test_fft_matches_numpy_and_naive_sum():
    rng = np.random.default_rng(0)
    x = rng.normal(size=64) + 1j * rng.normal(size=64)
    y = ibsmamp.fft(x)
    assert np.max(np.abs(y - np.fft.fft(x, norm="ortho"))) < 1e-12
    assert np.max(np.abs(y - naive_dft(x))) < 1e-12
    assert np.max(np.abs(ibsmamp.ifft(y) - x)) < 1e-12


def test_fwht_is_an_involution():
    x = np.arange(16, dtype=complex)
    assert np.max(np.abs(ibsmamp.fwht(ibsmamp.fwht(x)) - x)) < 1e-12


def test_permutation_goldens():
    assert ibsmamp.permutation(5, 42) == [4, 3, 2, 1, 0]
    assert ibsmamp.permutation(5, 1) == [4, 0, 1, 2, 3]


@pytest.mark.parametrize("variant", ["BS", "W_IBS", "B_IBS", "BW_IBS"])
@pytest.mark.parametrize("base", ["FFT", "FWHT"])
def test_ibs_transform_is_row_orthonormal(variant, base):
    t = ibsmamp.ibs_transform(64, 8, 32, variant, base, "kernel", 3, 4)
    assert t.shape == (32, 64)
    d = t.dense()
    assert np.max(np.abs(d @ d.conj().T - np.eye(32))) < 1e-10
    x = np.random.default_rng(1).normal(size=64).astype(complex)
    assert np.max(np.abs(t.apply(x) - d @ x)) < 1e-12
    y = np.random.default_rng(2).normal(size=32).astype(complex)
    assert np.max(np.abs(t.adjoint(y) - d.conj().T @ y)) < 1e-12


def test_relative_complexity_row():
    rc = ibsmamp.relative_complexity(4096, 128)
    assert abs(100 * rc["theta"] - 58.33) < 0.01
    assert abs(100 * rc["overall"] - 69.69) < 0.01


def test_damping_weights_beat_every_candidate():
    g = np.random.default_rng(3).normal(size=(3, 3))
    v = g @ g.T
    zeta, pred = ibsmamp.damping_weights(v)
    assert abs(zeta.sum() - 1.0) < 1e-9
    assert abs(zeta @ v @ zeta - pred) < 1e-9
    assert pred <= np.min(np.diag(v)) + 1e-12


def test_denoisers():
    mean, var, _ = ibsmamp.denoise_qpsk(np.array([0.9 + 0.9j]), 1e-4)
    assert abs(mean[0] - (1 + 1j) / np.sqrt(2)) < 1e-12
    mean, var, _ = ibsmamp.denoise_bernoulli_gaussian(np.array([1.0 + 0j]), 0.5, 1.0, 3.0)
    assert abs(mean[0] - 3.0 / 3.5) < 1e-14
    with pytest.raises(ValueError):
        ibsmamp.denoise_qpsk(np.array([1.0 + 0j]), 0.0)


def test_small_cs_experiment(tmp_path):
    cfg = ibsmamp.default_config("cs-mse")
    cfg.update(n=1024, n_s=128, trials=2, max_iters=15, snr_db=[30.0])
    res = ibsmamp.run_experiment(cfg, str(tmp_path))
    means = {row["scheme"]: row["mean"] for row in res["summary"]}
    assert set(means) == {"full", "BS", "W_IBS", "B_IBS", "BW_IBS"}
    assert means["BW_IBS"] < means["BS"]
    side = json.loads((tmp_path / "cs_mse.json").read_text())
    assert side["config_hash"] == res["config_hash"] == ibsmamp.config_hash(cfg)
    assert (tmp_path / "cs_mse_summary.csv").read_text().startswith("scheme,base,n_s,snr_db,trials")


def test_complexity_experiment_from_json_text():
    res = ibsmamp.run_experiment('{"experiment": "complexity-table"}')
    assert [r["n_s"] for r in res["summary"]] == [128, 32, 8, 4]


def test_bad_config_raises_config_error():
    with pytest.raises(ibsmamp.ConfigError, match="'n'"):
        ibsmamp.run_experiment({"experiment": "cs-mse", "n": 1000})
    with pytest.raises(ValueError):
        ibsmamp.run_experiment({"experiment": "cs-mse", "colour": 1})


def test_selftest_and_canary():
    ok, text = ibsmamp.selftest()
    assert ok, text
    bad, text = ibsmamp.selftest(inject_nle_sign_error=True)
    assert not bad
    assert "[FAIL] nle error orthogonality" in text
