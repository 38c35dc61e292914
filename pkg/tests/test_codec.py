import numpy as np
import pytest

from cleric import entropy
from cleric.codec import (CodecConfig, analysis_transform, compress_latents,
                          decompress_latents, hyper_decode, hyper_encode,
                          param_registry, quantize, required_names, slice_params,
                          synthesis_transform)
from cleric.weights import make_weights


@pytest.fixture(scope="module")
def cfg():
    return CodecConfig(hidden=8, latent=20, recursions=1, slices=5)


@pytest.fixture(scope="module")
def w(cfg):
    return make_weights(5, cfg)


def test_config_validation():
    with pytest.raises(ValueError, match="divisible"):
        CodecConfig(latent=321, slices=5)
    with pytest.raises(ValueError, match="positive"):
        CodecConfig(hidden=0)
    cfg = CodecConfig()
    assert cfg.hidden == 192 and cfg.latent == 320
    assert cfg.recursions == 2 and cfg.slices == 5
    assert len(cfg.lambda_grid) == 5
    assert abs(cfg.lambda_grid[0] - 0.005) < 1e-7
    assert abs(cfg.lambda_grid[-1] - 0.0335) < 1e-7


def test_registry_covers_all_toggles():
    base = CodecConfig(hidden=8, latent=20, recursions=1, slices=5)
    names = set(required_names(base))
    assert "lift.refine1.w" in names and "enc.low.down0.main.w" in names
    no_lift = CodecConfig(hidden=8, latent=20, recursions=1, slices=5,
                          lifting_enabled=False)
    nl = set(required_names(no_lift))
    assert "lift.refine1.w" not in nl and "enc.main.down3.main.w" in nl
    no_drb = CodecConfig(hidden=8, latent=20, recursions=1, slices=5, drb_enabled=False)
    assert not any(".offs." in n for n in required_names(no_drb))
    no_r2b = CodecConfig(hidden=8, latent=20, recursions=1, slices=5, r2b_enabled=False)
    assert not any(".r2b" in n for n in required_names(no_r2b))
    for c in (base, no_lift, no_drb, no_r2b):
        defs = param_registry(c)
        assert len({d.name for d in defs}) == len(defs)  # unique names


def test_analysis_latent_shape(cfg, w, rng):
    x = rng.random((1, 3, 128, 128), dtype=np.float32)
    y = analysis_transform(x, w, cfg).y
    assert y.shape == (1, 20, 8, 8)


def test_analysis_rejects_bad_inputs(cfg, w):
    with pytest.raises(ValueError, match="multiples of 64"):
        analysis_transform(np.zeros((1, 3, 100, 128), np.float32), w, cfg)
    with pytest.raises(ValueError, match="3 input channels"):
        analysis_transform(np.zeros((1, 4, 128, 128), np.float32), w, cfg)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        analysis_transform(np.full((1, 3, 64, 64), 1.5, np.float32), w, cfg)


def test_analysis_zero_image_zero_latent(cfg, w):
    x = np.zeros((1, 3, 64, 64), np.float32)
    y = analysis_transform(x, w, cfg).y
    assert np.max(np.abs(y)) == 0.0


def test_analysis_deterministic(cfg, w, rng):
    x = rng.random((1, 3, 64, 64), dtype=np.float32)
    y1 = analysis_transform(x, w, cfg).y
    y2 = analysis_transform(x, w, cfg).y
    assert np.array_equal(y1, y2)


def test_analysis_ablation_single_branch(rng):
    cfg = CodecConfig(hidden=8, latent=20, recursions=1, slices=5,
                      lifting_enabled=False, drb_enabled=False, r2b_enabled=False)
    w = make_weights(9, cfg)
    x = rng.random((1, 3, 64, 64), dtype=np.float32)
    y = analysis_transform(x, w, cfg).y
    assert y.shape == (1, 20, 4, 4)  # same latent contract
    out = synthesis_transform(y, w, cfg)
    assert out.shape == (1, 3, 64, 64)


def test_synthesis_shape_and_range(cfg, w, rng):
    y = rng.standard_normal((1, 20, 8, 8)).astype(np.float32)
    out = synthesis_transform(y, w, cfg)
    assert out.shape == (1, 3, 128, 128)
    assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0
    assert np.all(np.isfinite(out))


def test_synthesis_zero_latent(cfg, w):
    out = synthesis_transform(np.zeros((1, 20, 4, 4), np.float32), w, cfg)
    assert np.array_equal(out, np.zeros((1, 3, 64, 64), np.float32))


def test_synthesis_channel_mismatch(cfg, w):
    with pytest.raises(ValueError, match="channel mismatch"):
        synthesis_transform(np.zeros((1, 21, 4, 4), np.float32), w, cfg)


def test_hyper_shapes(cfg, w, rng):
    y = rng.standard_normal((1, 20, 16, 16)).astype(np.float32)
    z = hyper_encode(y, w, cfg)
    assert z.shape == (1, 8, 4, 4)
    psi = hyper_decode(z, w, cfg)
    assert psi.shape == (1, 40, 16, 16)
    assert np.array_equal(hyper_encode(y, w, cfg), z)


def test_hyper_zero(cfg, w):
    z = hyper_encode(np.zeros((1, 20, 8, 8), np.float32), w, cfg)
    assert np.max(np.abs(z)) == 0.0
    psi = hyper_decode(np.zeros((1, 8, 2, 2), np.float32), w, cfg)
    assert np.max(np.abs(psi)) == 0.0


def test_hyper_indivisible_error(cfg, w):
    with pytest.raises(ValueError, match="multiples of 4"):
        hyper_encode(np.zeros((1, 20, 6, 8), np.float32), w, cfg)


def test_slice_params_contract(cfg, w, rng):
    psi = rng.standard_normal((2, 40, 4, 4)).astype(np.float32)
    p0 = slice_params(psi, [], 0, w, cfg)
    assert p0.mu.shape == (2, 4, 4, 4)
    assert p0.sigma.shape == (2, 4, 4, 4)
    assert np.all(p0.sigma >= entropy.SIGMA_MIN) and np.all(p0.sigma <= entropy.SIGMA_MAX)
    prior = rng.standard_normal((2, 4, 4, 4)).astype(np.float32)
    p1 = slice_params(psi, [prior], 1, w, cfg)
    assert p1.mu.shape == (2, 4, 4, 4)
    with pytest.raises(ValueError, match="prior"):
        slice_params(psi, [], 1, w, cfg)
    with pytest.raises(ValueError, match="prior"):
        slice_params(psi, [prior, prior], 1, w, cfg)


def test_slice_params_batch_equivariance(cfg, w, rng):
    psi = rng.standard_normal((2, 40, 4, 4)).astype(np.float32)
    prior = rng.standard_normal((2, 4, 4, 4)).astype(np.float32)
    p = slice_params(psi, [prior], 1, w, cfg)
    swapped = slice_params(psi[::-1].copy(), [prior[::-1].copy()], 1, w, cfg)
    assert np.array_equal(p.mu[::-1], swapped.mu)
    assert np.array_equal(p.sigma[::-1], swapped.sigma)


def test_quantize_round_mode():
    v = np.array([1.4, -1.4, 1.5, -1.5, 0.0], np.float32)
    got = quantize(v, "round")
    assert np.array_equal(got, [1.0, -1.0, 2.0, -2.0, 0.0])
    got = quantize(np.array([1.4], np.float32), "round", mu=np.array([1.3], np.float32))
    assert abs(float(got[0]) - 1.3) < 1e-6


def test_quantize_residual_integral(rng):
    v = rng.standard_normal((64,)).astype(np.float32) * 5
    mu = rng.standard_normal((64,)).astype(np.float32)
    q = quantize(v, "round", mu=mu)
    resid = q - mu
    assert np.max(np.abs(resid - np.rint(resid))) < 1e-5


def test_quantize_noise_mode(rng):
    v = rng.standard_normal((1000,)).astype(np.float32)
    n1 = quantize(v, "noise", rng=np.random.default_rng(4))
    n2 = quantize(v, "noise", rng=np.random.default_rng(4))
    assert np.array_equal(n1, n2)
    assert np.max(np.abs(n1 - v)) <= 0.5
    with pytest.raises(ValueError, match="generator"):
        quantize(v, "noise")


def test_latent_coding_roundtrip(cfg, w, rng):
    x = rng.random((1, 3, 64, 64), dtype=np.float32)
    y = analysis_transform(x, w, cfg).y
    scale = entropy.default_scale_table()
    lat = compress_latents(y, w, cfg, scale)
    payloads = [entropy.encode_symbols(s, (scale.bank, i))
                for s, i in zip(lat.slice_syms, lat.slice_sigma_idx)]
    back = decompress_latents(lat.z_syms, payloads, w, cfg, scale, y.shape[2:])
    assert np.array_equal(back.y_hat, lat.y_hat)
    for a, b in zip(back.slice_syms, lat.slice_syms):
        assert np.array_equal(a, b)
    for a, b in zip(back.slice_sigma_idx, lat.slice_sigma_idx):
        assert np.array_equal(a, b)
