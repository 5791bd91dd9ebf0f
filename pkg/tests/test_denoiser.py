"""Transformer denoiser: forward oracle checks and manual-backprop gradients."""

import math

import numpy as np
import pytest

from scanpath_diffusion import ValidationError, init_denoiser
from scanpath_diffusion import denoiser as dn


def test_timestep_embedding_formula():
    """Independent per-element evaluation of the sinusoidal code."""
    dim = 10
    out = dn.timestep_embedding([0, 3, 117], dim)
    assert out.shape == (3, dim)
    half = dim // 2
    for row, t in enumerate((0, 3, 117)):
        for k in range(half):
            freq = math.exp(-math.log(10000.0) * k / half)
            assert out[row, k] == pytest.approx(math.cos(t * freq), abs=1e-12)
            assert out[row, half + k] == pytest.approx(math.sin(t * freq), abs=1e-12)


def test_timestep_embedding_odd_dim_pads_zero():
    out = dn.timestep_embedding(5, 7)
    assert out.shape == (1, 7)
    assert out[0, -1] == 0.0


def test_timestep_embedding_distinguishes_steps():
    a = dn.timestep_embedding(1, 32)
    b = dn.timestep_embedding(2, 32)
    assert not np.allclose(a, b)


def test_init_denoiser_tensor_set():
    params = init_denoiser(8, 2, 2, np.random.default_rng(0))
    names = set(params.tensors)
    assert {"time_w1", "time_b1", "time_w2", "time_b2",
            "ln_in_g", "ln_in_b", "ln_out_g", "ln_out_b"} <= names
    assert "b0.wq" in names and "b1.ffn_w2" in names
    assert "b2.wq" not in names
    assert params.head_dim == 4
    # residual branches close with zeros so each block starts as an identity
    assert np.all(params.tensors["b0.wo"] == 0.0)
    assert np.all(params.tensors["b1.ffn_w2"] == 0.0)


def test_init_denoiser_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValidationError):
        init_denoiser(10, 2, 3, rng)
    with pytest.raises(ValidationError):
        init_denoiser(8, 0, 2, rng)


def test_forward_shape_and_finite():
    rng = np.random.default_rng(1)
    params = init_denoiser(8, 2, 2, rng)
    z = rng.standard_normal((3, 6, 8))
    pad = np.ones((3, 6), dtype=bool)
    pad[2, 4:] = False
    out, cache = dn.forward(params, z, 5, pad)
    assert out.shape == (3, 6, 8)
    assert np.all(np.isfinite(out))
    assert np.max(np.abs(out)) < 1e3
    assert cache is None


def test_forward_rejects_bad_shape():
    params = init_denoiser(8, 1, 2, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        dn.forward(params, np.zeros((2, 4, 7)), 1, np.ones((2, 4), dtype=bool))


def test_fresh_blocks_are_identity():
    """With zeroed closing projections, the net is LN(LN(z + time))."""
    rng = np.random.default_rng(2)
    params = init_denoiser(8, 3, 2, rng)
    z = rng.standard_normal((2, 5, 8))
    pad = np.ones((2, 5), dtype=bool)
    out, _ = dn.forward(params, z, 4, pad)
    p = params.tensors
    t_code = dn.timestep_embedding(np.array([4.0, 4.0]), 8)
    t_vec = dn._gelu(t_code @ p["time_w1"] + p["time_b1"]) @ p["time_w2"] + p["time_b2"]
    h = z + t_vec[:, None, :]
    for _ in range(2):  # ln_in then ln_out; inner blocks add zero
        mu = h.mean(axis=-1, keepdims=True)
        var = h.var(axis=-1, keepdims=True)
        h = (h - mu) / np.sqrt(var + 1e-5)
    assert np.allclose(out, h, atol=1e-12)


def _loop_attention(z, params, t, pad_row):
    """Single-block, single-head attention computed with explicit loops.

    Mirrors the architecture contract (pre-LN residual attention + FFN,
    time code added at the input) without any of the library's vectorized
    machinery.
    """
    p = params.tensors
    dim = params.dim
    L = z.shape[0]

    def ln(vec, g, b):
        mu = sum(vec) / dim
        var = sum((v - mu) ** 2 for v in vec) / dim
        return [(v - mu) / math.sqrt(var + 1e-5) * g[i] + b[i]
                for i, v in enumerate(vec)]

    def gelu(x):
        return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))

    # time vector
    code = dn.timestep_embedding(np.array([float(t)]), dim)[0]
    hid = [sum(code[a] * p["time_w1"][a, j] for a in range(dim)) + p["time_b1"][j]
           for j in range(4 * dim)]
    act = [gelu(v) for v in hid]
    tv = [sum(act[a] * p["time_w2"][a, j] for a in range(4 * dim)) + p["time_b2"][j]
          for j in range(dim)]

    h = [[z[i, j] + tv[j] for j in range(dim)] for i in range(L)]
    h = [ln(row, p["ln_in_g"], p["ln_in_b"]) for row in h]

    a_rows = [ln(row, p["b0.ln1_g"], p["b0.ln1_b"]) for row in h]

    def proj(row, w, b):
        return [sum(row[a] * w[a, j] for a in range(dim)) + b[j] for j in range(dim)]

    q = [proj(r, p["b0.wq"], p["b0.bq"]) for r in a_rows]
    k = [proj(r, p["b0.wk"], p["b0.bk"]) for r in a_rows]
    v = [proj(r, p["b0.wv"], p["b0.bv"]) for r in a_rows]
    scale = 1.0 / math.sqrt(dim)  # one head: head_dim = dim
    out_rows = []
    for i in range(L):
        scores = []
        for j in range(L):
            s = sum(q[i][a] * k[j][a] for a in range(dim)) * scale
            if not pad_row[j]:
                s += -1e30
            scores.append(s)
        mx = max(scores)
        ex = [math.exp(s - mx) for s in scores]
        tot = sum(ex)
        att = [e / tot for e in ex]
        ctx = [sum(att[j] * v[j][a] for j in range(L)) for a in range(dim)]
        attn_out = proj(ctx, p["b0.wo"], p["b0.bo"])
        out_rows.append([h[i][a] + attn_out[a] for a in range(dim)])

    final = []
    for row in out_rows:
        fin = ln(row, p["b0.ln2_g"], p["b0.ln2_b"])
        u = [sum(fin[a] * p["b0.ffn_w1"][a, j] for a in range(dim)) + p["b0.ffn_b1"][j]
             for j in range(4 * dim)]
        g = [gelu(x) for x in u]
        ffn = [sum(g[a] * p["b0.ffn_w2"][a, j] for a in range(4 * dim)) + p["b0.ffn_b2"][j]
               for j in range(dim)]
        mid = [row[a] + ffn[a] for a in range(dim)]
        final.append(ln(mid, p["ln_out_g"], p["ln_out_b"]))
    return np.array(final)


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(3)
    params = init_denoiser(4, 1, 1, rng)
    # randomize every tensor so the zero-init projections do not hide bugs
    for name, arr in params.tensors.items():
        arr[...] = rng.normal(0, 0.5, size=arr.shape)
    z = rng.standard_normal((1, 3, 4))
    pad_row = [True, True, False]
    pad = np.array([pad_row])
    out, _ = dn.forward(params, z, 7, pad)
    oracle = _loop_attention(z[0], params, 7, pad_row)
    assert np.allclose(out[0], oracle, atol=1e-10)


def test_pad_keys_never_attended():
    """Output at real positions is unchanged by arbitrary values at padding."""
    rng = np.random.default_rng(4)
    params = init_denoiser(8, 2, 2, rng)
    for name, arr in params.tensors.items():
        arr[...] = rng.normal(0, 0.3, size=arr.shape)
    z = rng.standard_normal((2, 6, 8))
    pad = np.ones((2, 6), dtype=bool)
    pad[:, 4:] = False
    out_a, _ = dn.forward(params, z, 3, pad)
    z2 = z.copy()
    z2[:, 4:, :] = rng.standard_normal((2, 2, 8)) * 50.0
    out_b, _ = dn.forward(params, z2, 3, pad)
    assert np.allclose(out_a[:, :4], out_b[:, :4], atol=1e-12)


def test_pad_positions_receive_zero_gradient():
    rng = np.random.default_rng(5)
    params = init_denoiser(8, 2, 2, rng)
    for _, arr in params.tensors.items():
        arr[...] = rng.normal(0, 0.3, size=arr.shape)
    z = rng.standard_normal((1, 5, 8))
    pad = np.array([[True, True, True, False, False]])
    _, cache = dn.forward(params, z, 2, pad, need_cache=True)
    d_out = rng.standard_normal((1, 5, 8))
    d_out[:, 3:, :] = 0.0  # upstream loss never touches pad outputs
    _, d_z = dn.backward(params, cache, d_out)
    assert np.allclose(d_z[:, 3:, :], 0.0, atol=1e-18)


def test_backward_input_gradient_fd():
    rng = np.random.default_rng(6)
    params = init_denoiser(4, 2, 2, rng)
    for _, arr in params.tensors.items():
        arr[...] = rng.normal(0, 0.3, size=arr.shape)
    z = rng.standard_normal((1, 4, 4))
    pad = np.array([[True, True, True, True]])
    d_out = rng.standard_normal((1, 4, 4))

    def scalar_loss(zz):
        out, _ = dn.forward(params, zz, 3, pad)
        return float((out * d_out).sum())

    _, cache = dn.forward(params, z, 3, pad, need_cache=True)
    _, d_z = dn.backward(params, cache, d_out)
    eps = 1e-6
    for idx in [(0, 0, 0), (0, 1, 2), (0, 3, 3), (0, 2, 1)]:
        zp = z.copy(); zp[idx] += eps
        zm = z.copy(); zm[idx] -= eps
        fd = (scalar_loss(zp) - scalar_loss(zm)) / (2 * eps)
        assert d_z[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_backward_parameter_gradients_fd():
    """Central differences over a sample of entries of every tensor."""
    rng = np.random.default_rng(7)
    params = init_denoiser(4, 1, 2, rng)
    for _, arr in params.tensors.items():
        arr[...] = rng.normal(0, 0.3, size=arr.shape)
    z = rng.standard_normal((2, 3, 4))
    pad = np.array([[True, True, True], [True, True, False]])
    d_out = rng.standard_normal((2, 3, 4))
    d_out[1, 2] = 0.0

    def scalar_loss():
        out, _ = dn.forward(params, z, np.array([2, 5]), pad)
        return float((out * d_out).sum())

    _, cache = dn.forward(params, z, np.array([2, 5]), pad, need_cache=True)
    grads, _ = dn.backward(params, cache, d_out)
    eps = 1e-6
    for name, arr in params.tensors.items():
        flat = arr.reshape(-1)
        picks = rng.choice(flat.size, size=min(4, flat.size), replace=False)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + eps
            up = scalar_loss()
            flat[j] = orig - eps
            down = scalar_loss()
            flat[j] = orig
            fd = (up - down) / (2 * eps)
            got = grads[name].reshape(-1)[j]
            assert got == pytest.approx(fd, rel=1e-4, abs=1e-7), name


def test_per_row_t_changes_only_that_row():
    rng = np.random.default_rng(8)
    params = init_denoiser(8, 1, 2, rng)
    z = rng.standard_normal((2, 4, 8))
    pad = np.ones((2, 4), dtype=bool)
    base, _ = dn.forward(params, z, np.array([3, 3]), pad)
    bumped, _ = dn.forward(params, z, np.array([3, 9]), pad)
    assert np.allclose(base[0], bumped[0], atol=1e-15)
    assert not np.allclose(base[1], bumped[1])
