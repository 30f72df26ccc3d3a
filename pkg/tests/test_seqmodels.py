import math

import numpy as np
import pytest
from scipy.special import expit

from fmnsed import seqmodels as sm
from fmnsed.tensor import ShapeError, Tensor
from fmnsed.weights import WeightStore


def seq_store(cfg, seed=0, overrides=None):
    rng = np.random.default_rng(seed)
    store = WeightStore()
    overrides = overrides or {}
    for name, shape in sm.param_inventory(cfg).items():
        if name in overrides:
            v = np.broadcast_to(np.asarray(overrides[name], np.float32), shape).copy()
        elif name.endswith(".gamma"):
            v = np.ones(shape, dtype=np.float32)
        elif name.endswith(".beta"):
            v = np.zeros(shape, dtype=np.float32)
        elif name.endswith(".a_log"):
            v = np.zeros(shape, dtype=np.float32)
        elif name.endswith(".dt_bias"):
            v = np.full(shape, -1.0, dtype=np.float32)
        else:
            v = rng.normal(0.0, 0.3, size=shape).astype(np.float32)
        store.add(name, v)
    return store


def single(cfg_kind, hidden, **kw):
    return sm.SeqConfig(kind=cfg_kind, hidden_dim=hidden, num_blocks=1, **kw)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def rotary_oracle(vecs, dh):
    """Pairwise rotation of [T, dh] rows, pair i = (i, i + dh/2)."""
    half = dh // 2
    out = np.array(vecs, dtype=np.float64, copy=True)
    for t in range(out.shape[0]):
        for i in range(half):
            theta = t * sm.ROTARY_BASE ** (-2.0 * i / dh)
            a, b = out[t, i], out[t, i + half]
            out[t, i] = a * math.cos(theta) - b * math.sin(theta)
            out[t, i + half] = a * math.sin(theta) + b * math.cos(theta)
    return out


def mhsa_oracle(x, store, heads, use_rotary, prefix="attn."):
    x64 = np.asarray(x, dtype=np.float64)
    t_len, d = x64.shape
    dh = d // heads

    def proj(nm):
        w = store.arr(prefix + nm + ".w").astype(np.float64)
        b = store.arr(prefix + nm + ".b").astype(np.float64)
        return x64 @ w.T + b

    q, k, v = proj("q"), proj("k"), proj("v")
    ctx = np.zeros((t_len, d))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
        if use_rotary:
            qh = rotary_oracle(qh, dh)
            kh = rotary_oracle(kh, dh)
        for ti in range(t_len):
            scores = np.array([qh[ti] @ kh[s] for s in range(t_len)]) / math.sqrt(dh)
            e = np.exp(scores - scores.max())
            attn = e / e.sum()
            assert abs(attn.sum() - 1.0) < 1e-6
            ctx[ti, sl] = sum(attn[s] * vh[s] for s in range(t_len))
    wo = store.arr(prefix + "out.w").astype(np.float64)
    bo = store.arr(prefix + "out.b").astype(np.float64)
    return ctx @ wo.T + bo


def gru_oracle(x, store, prefix, h_dim):
    x64 = np.asarray(x, dtype=np.float64)
    w = {g: store.arr(prefix + f"w_{g}").astype(np.float64) for g in "rzn"}
    u = {g: store.arr(prefix + f"u_{g}").astype(np.float64) for g in "rzn"}
    bi = {g: store.arr(prefix + f"b_i{g}").astype(np.float64) for g in "rzn"}
    bh = {g: store.arr(prefix + f"b_h{g}").astype(np.float64) for g in "rzn"}
    h = np.zeros(h_dim)
    out = []
    for t in range(x64.shape[0]):
        r = expit(w["r"] @ x64[t] + bi["r"] + u["r"] @ h + bh["r"])
        z = expit(w["z"] @ x64[t] + bi["z"] + u["z"] @ h + bh["z"])
        n = np.tanh(w["n"] @ x64[t] + bi["n"] + r * (u["n"] @ h + bh["n"]))
        h = (1.0 - z) * n + z * h
        out.append(h.copy())
    return np.stack(out)


def mingru_oracle(x, store, prefix, h_dim):
    x64 = np.asarray(x, dtype=np.float64)
    w_z = store.arr(prefix + "w_z").astype(np.float64)
    b_z = store.arr(prefix + "b_z").astype(np.float64)
    w_h = store.arr(prefix + "w_h").astype(np.float64)
    b_h = store.arr(prefix + "b_h").astype(np.float64)
    h = np.zeros(h_dim)
    out = []
    for t in range(x64.shape[0]):
        z = expit(w_z @ x64[t] + b_z)
        cand = w_h @ x64[t] + b_h
        h = (1.0 - z) * h + z * cand
        out.append(h.copy())
    return np.stack(out)


def mamba_scan_oracle(log_a, b, c, xt):
    a = np.exp(np.asarray(log_a, dtype=np.float64))
    bv = np.asarray(b, dtype=np.float64)
    cv = np.asarray(c, dtype=np.float64)
    xv = np.asarray(xt, dtype=np.float64)
    t_len, heads = a.shape
    n, p = bv.shape[1], xv.shape[2]
    state = np.zeros((heads, n, p))
    ys = []
    for t in range(t_len):
        state = a[t][:, None, None] * state + bv[t][None, :, None] * xv[t][:, None, :]
        ys.append(np.einsum("n,hnp->hp", cv[t], state))
    return np.stack(ys)


def rel_err(a, b):
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64)))) / scale


# ---------------------------------------------------------------------------
# rotary
# ---------------------------------------------------------------------------

class TestRotary:
    def test_position_zero_is_identity(self):
        rng = np.random.default_rng(0)
        q = rng.normal(size=(4, 2, 8)).astype(np.float32)
        k = rng.normal(size=(4, 2, 8)).astype(np.float32)
        qr, _ = sm.rotary_embed(q, k)
        np.testing.assert_allclose(qr.data[0], q[0], atol=1e-6)

    def test_norm_preserved(self):
        rng = np.random.default_rng(1)
        q = rng.normal(size=(16, 2, 8)).astype(np.float32)
        qr, _ = sm.rotary_embed(q, q.copy())
        np.testing.assert_allclose(
            np.linalg.norm(qr.data, axis=-1), np.linalg.norm(q, axis=-1), atol=1e-6
        )

    def test_dot_depends_on_relative_position_only(self):
        rng = np.random.default_rng(2)
        q0 = rng.normal(size=8)
        k0 = rng.normal(size=8)
        q = np.zeros((8, 1, 8), np.float32)
        k = np.zeros((8, 1, 8), np.float32)
        q[3, 0] = q[7, 0] = q0
        k[1, 0] = k[5, 0] = k0
        qr, kr = sm.rotary_embed(q, k)
        d1 = float(qr.data[3, 0] @ kr.data[1, 0])
        d2 = float(qr.data[7, 0] @ kr.data[5, 0])
        assert abs(d1 - d2) < 1e-5

    def test_absolute_addition_would_break_relative_property(self):
        # guard test: adding position values directly shifts dot products
        rng = np.random.default_rng(3)
        q0, k0 = rng.normal(size=8), rng.normal(size=8)
        d1 = float((q0 + 3) @ (k0 + 1))
        d2 = float((q0 + 7) @ (k0 + 5))
        assert abs(d1 - d2) > 1e-3

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(4)
        q = rng.normal(size=(6, 2, 10)).astype(np.float32)
        k = rng.normal(size=(6, 2, 10)).astype(np.float32)
        qr, kr = sm.rotary_embed(q, k)
        for h in range(2):
            np.testing.assert_allclose(qr.data[:, h], rotary_oracle(q[:, h], 10), atol=1e-5)
            np.testing.assert_allclose(kr.data[:, h], rotary_oracle(k[:, h], 10), atol=1e-5)

    def test_odd_head_dim_rejected(self):
        with pytest.raises(ShapeError, match="even"):
            sm.rotary_embed(np.zeros((2, 1, 5), np.float32), np.zeros((2, 1, 5), np.float32))


# ---------------------------------------------------------------------------
# attention blocks
# ---------------------------------------------------------------------------

class TestMhsa:
    def test_single_token_reduces_to_projections(self):
        cfg = single("ATT", 8, num_heads=2)
        store = seq_store(cfg, seed=5)
        x = np.random.default_rng(6).normal(size=(1, 8)).astype(np.float32)
        out = sm.mhsa(x, store, 2, use_rotary=True, prefix="seq.block0.attn.")
        v = x @ store.arr("seq.block0.attn.v.w").T + store.arr("seq.block0.attn.v.b")
        ref = v @ store.arr("seq.block0.attn.out.w").T + store.arr("seq.block0.attn.out.b")
        np.testing.assert_allclose(out.data, ref, atol=1e-5)

    def test_attention_rows_sum_to_one(self):
        # constant value rows propagate unchanged iff weights sum to 1
        cfg = single("ATT", 8, num_heads=2)
        c = np.arange(1.0, 9.0, dtype=np.float32)
        store = seq_store(cfg, seed=7, overrides={
            "seq.block0.attn.v.w": np.zeros((8, 8), np.float32),
            "seq.block0.attn.v.b": c,
            "seq.block0.attn.out.w": np.eye(8, dtype=np.float32),
            "seq.block0.attn.out.b": np.zeros(8, np.float32),
        })
        x = np.random.default_rng(8).normal(size=(6, 8)).astype(np.float32)
        out = sm.mhsa(x, store, 2, prefix="seq.block0.attn.")
        np.testing.assert_allclose(out.data, np.tile(c, (6, 1)), atol=1e-5)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_per_head_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        heads = int(rng.choice([1, 2, 4]))
        dh = int(rng.choice([2, 4, 6]))
        d = heads * dh
        t_len = int(rng.integers(2, 7))
        cfg = single("ATT", d, num_heads=heads)
        store = seq_store(cfg, seed=seed + 100)
        x = rng.normal(size=(t_len, d)).astype(np.float32)
        out = sm.mhsa(x, store, heads, use_rotary=True, prefix="seq.block0.attn.")
        ref = mhsa_oracle(x, store, heads, use_rotary=True, prefix="seq.block0.attn.")
        assert rel_err(out.data, ref) < 1e-5


class TestTfBlock:
    def test_zeroed_projections_give_identity(self):
        cfg = single("TF", 8, num_heads=2)
        store = seq_store(cfg, seed=9, overrides={
            "seq.block0.attn.out.w": np.zeros((8, 8), np.float32),
            "seq.block0.attn.out.b": np.zeros(8, np.float32),
            "seq.block0.ffn.fc2.w": np.zeros((8, 32), np.float32),
            "seq.block0.ffn.fc2.b": np.zeros(8, np.float32),
        })
        x = np.random.default_rng(10).normal(size=(5, 8)).astype(np.float32)
        out = sm.tf_block(x, store, "seq.block0.", 2)
        np.testing.assert_allclose(out.data, x, atol=1e-6)

    def test_shape_preserved(self):
        cfg = single("TF", 256)
        store = seq_store(cfg, seed=11)
        x = np.zeros((250, 256), np.float32)
        assert sm.tf_block(x, store, "seq.block0.", cfg.heads).shape == (250, 256)

    def test_matches_composition_of_tested_ops(self):
        from fmnsed.tensor import activation, layer_norm, linear

        cfg = single("TF", 8, num_heads=2)
        store = seq_store(cfg, seed=12)
        x = np.random.default_rng(13).normal(size=(6, 8)).astype(np.float32)
        out = sm.tf_block(x, store, "seq.block0.", 2)
        p = "seq.block0."
        n1 = layer_norm(x, store.arr(p + "ln1.gamma"), store.arr(p + "ln1.beta"))
        h = x + sm.mhsa(n1, store, 2, use_rotary=True, prefix=p + "attn.").data
        n2 = layer_norm(h, store.arr(p + "ln2.gamma"), store.arr(p + "ln2.beta"))
        f = linear(n2, store.get(p + "ffn.fc1.w"), store.get(p + "ffn.fc1.b"))
        f = activation(f, "gelu")
        f = linear(f, store.get(p + "ffn.fc2.w"), store.get(p + "ffn.fc2.b"))
        np.testing.assert_allclose(out.data, h + f.data, atol=1e-6)


# ---------------------------------------------------------------------------
# BiGRU
# ---------------------------------------------------------------------------

class TestBigru:
    def test_length_one_directions_agree(self):
        cfg = single("BIGRU", 8)
        store = seq_store(cfg, seed=14)
        tensors = dict(store.items())
        for g in "rzn":
            for leaf in (f"w_{g}", f"u_{g}", f"b_i{g}", f"b_h{g}"):
                tensors[f"seq.block0.gru.bwd.{leaf}"] = tensors[f"seq.block0.gru.fwd.{leaf}"]
        store = WeightStore(tensors)
        x = np.random.default_rng(15).normal(size=(1, 8)).astype(np.float32)
        out = sm.bigru(x, store, "seq.block0.").data
        np.testing.assert_allclose(out[0, :4], out[0, 4:], atol=1e-6)

    def test_manual_two_step_recurrence(self):
        cfg = single("BIGRU", 4)
        zeros = {}
        for d in ("fwd", "bwd"):
            for g in "rzn":
                zeros[f"seq.block0.gru.{d}.w_{g}"] = 0.0
                zeros[f"seq.block0.gru.{d}.u_{g}"] = 0.0
                zeros[f"seq.block0.gru.{d}.b_i{g}"] = 0.0
                zeros[f"seq.block0.gru.{d}.b_h{g}"] = 0.0
            zeros[f"seq.block0.gru.{d}.b_in"] = 0.3
            zeros[f"seq.block0.gru.{d}.b_hn"] = 0.4
        store = seq_store(cfg, overrides=zeros)
        x = np.zeros((2, 4), np.float32)
        out = sm.bigru(x, store, "seq.block0.").data
        n = math.tanh(0.3 + 0.5 * 0.4)
        h1 = 0.5 * n
        h2 = 0.5 * n + 0.5 * h1
        np.testing.assert_allclose(out[0, :2], [h1, h1], atol=1e-6)  # fwd step 1
        np.testing.assert_allclose(out[1, :2], [h2, h2], atol=1e-6)  # fwd step 2
        np.testing.assert_allclose(out[1, 2:], [h1, h1], atol=1e-6)  # bwd sees reversed
        np.testing.assert_allclose(out[0, 2:], [h2, h2], atol=1e-6)

    def test_matches_scalar_loop_oracle(self):
        cfg = single("BIGRU", 8)
        store = seq_store(cfg, seed=16)
        x = np.random.default_rng(17).normal(size=(5, 8)).astype(np.float32)
        out = sm.bigru(x, store, "seq.block0.").data
        fwd = gru_oracle(x, store, "seq.block0.gru.fwd.", 4)
        bwd = gru_oracle(x[::-1], store, "seq.block0.gru.bwd.", 4)[::-1]
        assert rel_err(out, np.concatenate([fwd, bwd], axis=1)) < 1e-5

    def test_output_depends_on_full_sequence(self):
        cfg = single("BIGRU", 8)
        store = seq_store(cfg, seed=18)
        rng = np.random.default_rng(19)
        x = rng.normal(size=(6, 8)).astype(np.float32)
        base = sm.bigru(x, store, "seq.block0.").data
        x2 = x.copy()
        x2[-1] += 1.0
        moved = sm.bigru(x2, store, "seq.block0.").data
        assert np.max(np.abs(moved[0] - base[0])) > 1e-6

    def test_odd_dim_rejected(self):
        with pytest.raises(ShapeError, match="even"):
            sm.bigru(np.zeros((3, 5), np.float32), WeightStore(), "x.")


# ---------------------------------------------------------------------------
# TCN
# ---------------------------------------------------------------------------

class TestTcn:
    def test_receptive_field_is_63(self):
        assert sm.tcn_receptive_field() == 63

    def test_impulse_support_is_94_to_156(self):
        d = 4
        cfg = single("TCN", d)
        rng = np.random.default_rng(20)
        overrides = {}
        for n in range(5):
            overrides[f"seq.block0.conv{n}.w"] = (
                np.abs(rng.normal(size=(d, d, 3))) + 0.01
            ).astype(np.float32)
            overrides[f"seq.block0.conv{n}.b"] = np.zeros(d, np.float32)
        store = seq_store(cfg, overrides=overrides)
        x = np.zeros((250, d), np.float32)
        x[125] = 1.0
        out = sm.tcn_block(x, store, "seq.block0.").data - x
        touched = np.flatnonzero(np.abs(out).max(axis=1) > 0)
        assert touched[0] == 125 - 31
        assert touched[-1] == 125 + 31
        assert len(touched) == 63

    def test_identity_kernels_linear_mode_passthrough(self):
        d = 3
        cfg = single("TCN", d)
        eye_tap = np.zeros((d, d, 3), np.float32)
        eye_tap[:, :, 1] = np.eye(d)
        overrides = {}
        for n in range(5):
            overrides[f"seq.block0.conv{n}.w"] = eye_tap
            overrides[f"seq.block0.conv{n}.b"] = np.zeros(d, np.float32)
        store = seq_store(cfg, overrides=overrides)
        x = np.random.default_rng(21).normal(size=(40, d)).astype(np.float32)
        out = sm.tcn_conv_stack(x, store, "seq.block0.", activation_kind="identity")
        np.testing.assert_allclose(out.data, x, atol=1e-6)

    def test_zero_weights_residual_identity(self):
        d = 3
        cfg = single("TCN", d)
        overrides = {}
        for n in range(5):
            overrides[f"seq.block0.conv{n}.w"] = np.zeros((d, d, 3), np.float32)
            overrides[f"seq.block0.conv{n}.b"] = np.zeros(d, np.float32)
        store = seq_store(cfg, overrides=overrides)
        x = np.random.default_rng(22).normal(size=(30, d)).astype(np.float32)
        out = sm.tcn_block(x, store, "seq.block0.")
        np.testing.assert_allclose(out.data, x, atol=1e-7)


# ---------------------------------------------------------------------------
# Mamba
# ---------------------------------------------------------------------------

class TestMambaScan:
    @pytest.mark.parametrize("t_len", [1, 2, 7, 32, 250])
    def test_chunked_equals_sequential_oracle(self, t_len):
        rng = np.random.default_rng(t_len)
        heads, n, p = 2, 16, 4
        log_a = -np.abs(rng.normal(size=(t_len, heads)))
        b = rng.normal(size=(t_len, n))
        c = rng.normal(size=(t_len, n))
        xt = rng.normal(size=(t_len, heads, p))
        ours = sm.mamba_scan_chunked(log_a, b, c, xt, chunk_size=8)
        ref = mamba_scan_oracle(log_a, b, c, xt)
        assert rel_err(ours, ref) < 1e-5

    def test_sequential_helper_matches_oracle(self):
        rng = np.random.default_rng(99)
        log_a = -np.abs(rng.normal(size=(16, 2)))
        b = rng.normal(size=(16, 8))
        c = rng.normal(size=(16, 8))
        xt = rng.normal(size=(16, 2, 4))
        np.testing.assert_allclose(
            sm.mamba_scan_sequential(log_a, b, c, xt),
            mamba_scan_oracle(log_a, b, c, xt), atol=1e-9)


class TestMambaBlock:
    def test_zero_decay_is_memoryless(self):
        d = 8
        cfg = single("MAMBA", d, state_dim=16)
        store = seq_store(cfg, seed=23, overrides={"seq.block0.mamba.a_log": 25.0})
        rng = np.random.default_rng(24)
        x = rng.normal(size=(10, d)).astype(np.float32)
        base = sm.mamba2_block(x, store, "seq.block0.", state_dim=16).data
        perm = x.copy()
        perm[[0, 1, 2, 4, 5]] = perm[[5, 4, 2, 1, 0]]  # keep row 3 fixed
        out = sm.mamba2_block(perm, store, "seq.block0.", state_dim=16).data
        np.testing.assert_allclose(out[3], base[3], atol=1e-6)

    def test_chunk_size_invariance(self):
        d = 8
        cfg = single("MAMBA", d, state_dim=16)
        store = seq_store(cfg, seed=25)
        x = np.random.default_rng(26).normal(size=(16, d)).astype(np.float32)
        outs = [
            sm.mamba2_block(x, store, "seq.block0.", state_dim=16, chunk_size=cs).data
            for cs in (1, 3, 16, 64)
        ]
        for other in outs[1:]:
            assert rel_err(other, outs[0]) < 1e-5

    def test_shape_preserved(self):
        cfg = single("MAMBA", 8, state_dim=16)
        store = seq_store(cfg, seed=27)
        x = np.zeros((250, 8), np.float32)
        assert sm.mamba2_block(x, store, "seq.block0.", 16).shape == (250, 8)


# ---------------------------------------------------------------------------
# minGRU
# ---------------------------------------------------------------------------

class TestMingru:
    def test_parallel_scan_matches_sequential(self):
        cfg = single("HYBRID", 8)
        store = seq_store(cfg, seed=28)
        x = np.random.default_rng(29).normal(size=(32, 8)).astype(np.float32)
        out = sm.mingru_bidirectional(x, store, "seq.block0.").data
        fwd = mingru_oracle(x, store, "seq.block0.mingru.fwd.", 4)
        bwd = mingru_oracle(x[::-1], store, "seq.block0.mingru.bwd.", 4)[::-1]
        assert rel_err(out, np.concatenate([fwd, bwd], axis=1)) < 1e-5

    def test_saturated_gate_kills_recurrence(self):
        d = 8
        cfg = single("HYBRID", d)
        store = seq_store(cfg, seed=30, overrides={
            "seq.block0.mingru.fwd.b_z": 60.0,
            "seq.block0.mingru.bwd.b_z": 60.0,
        })
        x = np.random.default_rng(31).normal(size=(12, d)).astype(np.float32)
        out = sm.mingru_bidirectional(x, store, "seq.block0.").data
        for direction, sl in (("fwd", slice(0, 4)), ("bwd", slice(4, 8))):
            w_h = store.arr(f"seq.block0.mingru.{direction}.w_h")
            b_h = store.arr(f"seq.block0.mingru.{direction}.b_h")
            np.testing.assert_allclose(out[:, sl], x @ w_h.T + b_h, atol=1e-4)

    def test_length_one_initial_state(self):
        cfg = single("HYBRID", 8)
        store = seq_store(cfg, seed=32)
        x = np.random.default_rng(33).normal(size=(1, 8)).astype(np.float32)
        out = sm.mingru_bidirectional(x, store, "seq.block0.").data
        for direction, sl in (("fwd", slice(0, 4)), ("bwd", slice(4, 8))):
            p = f"seq.block0.mingru.{direction}."
            z = expit(x @ store.arr(p + "w_z").T + store.arr(p + "b_z"))
            cand = x @ store.arr(p + "w_h").T + store.arr(p + "b_h")
            np.testing.assert_allclose(out[:, sl], z * cand, atol=1e-5)


# ---------------------------------------------------------------------------
# hybrid
# ---------------------------------------------------------------------------

class TestHybrid:
    def test_zeroed_branches_residual_identity(self):
        d = 8
        cfg = single("HYBRID", d)
        store = seq_store(cfg, seed=34, overrides={
            "seq.block0.attn.out.w": np.zeros((d, d), np.float32),
            "seq.block0.attn.out.b": np.zeros(d, np.float32),
            "seq.block0.mingru.fwd.w_h": np.zeros((4, d), np.float32),
            "seq.block0.mingru.fwd.b_h": np.zeros(4, np.float32),
            "seq.block0.mingru.bwd.w_h": np.zeros((4, d), np.float32),
            "seq.block0.mingru.bwd.b_h": np.zeros(4, np.float32),
            "seq.block0.mix.w": np.zeros((d, d), np.float32),
            "seq.block0.mix.b": np.zeros(d, np.float32),
        })
        x = np.random.default_rng(35).normal(size=(10, d)).astype(np.float32)
        out = sm.hybrid_block(x, store, "seq.block0.", 2)
        np.testing.assert_allclose(out.data, x, atol=1e-7)

    def test_equal_branches_average_to_branch_value(self):
        d = 8
        c = np.linspace(0.5, 2.0, d).astype(np.float32)
        cfg = single("HYBRID", d)
        store = seq_store(cfg, seed=36, overrides={
            # attention branch returns the constant c
            "seq.block0.attn.q.w": np.zeros((d, d), np.float32),
            "seq.block0.attn.q.b": np.zeros(d, np.float32),
            "seq.block0.attn.k.w": np.zeros((d, d), np.float32),
            "seq.block0.attn.k.b": np.zeros(d, np.float32),
            "seq.block0.attn.v.w": np.zeros((d, d), np.float32),
            "seq.block0.attn.v.b": c,
            "seq.block0.attn.out.w": np.eye(d, dtype=np.float32),
            "seq.block0.attn.out.b": np.zeros(d, np.float32),
            # minGRU branch saturates to the same constant
            "seq.block0.mingru.fwd.w_z": np.zeros((4, d), np.float32),
            "seq.block0.mingru.fwd.b_z": np.full(4, 60.0, np.float32),
            "seq.block0.mingru.fwd.w_h": np.zeros((4, d), np.float32),
            "seq.block0.mingru.fwd.b_h": c[:4],
            "seq.block0.mingru.bwd.w_z": np.zeros((4, d), np.float32),
            "seq.block0.mingru.bwd.b_z": np.full(4, 60.0, np.float32),
            "seq.block0.mingru.bwd.w_h": np.zeros((4, d), np.float32),
            "seq.block0.mingru.bwd.b_h": c[4:],
            "seq.block0.mix.w": np.eye(d, dtype=np.float32),
            "seq.block0.mix.b": np.zeros(d, np.float32),
        })
        x = np.random.default_rng(37).normal(size=(6, d)).astype(np.float32)
        out = sm.hybrid_block(x, store, "seq.block0.", 2)
        np.testing.assert_allclose(out.data - x, np.tile(c, (6, 1)), atol=1e-4)

    def test_matches_branch_composition(self):
        from fmnsed.tensor import layer_norm, linear

        d = 8
        cfg = single("HYBRID", d)
        store = seq_store(cfg, seed=38)
        x = np.random.default_rng(39).normal(size=(7, d)).astype(np.float32)
        out = sm.hybrid_block(x, store, "seq.block0.", 2)
        p = "seq.block0."
        n = layer_norm(x, store.arr(p + "ln.gamma"), store.arr(p + "ln.beta"))
        attn = sm.mhsa(n, store, 2, use_rotary=False, prefix=p + "attn.").data
        rec = sm.mingru_bidirectional(n, store, p).data
        mixed = linear((attn + rec) / 2.0, store.get(p + "mix.w"), store.get(p + "mix.b")).data
        np.testing.assert_allclose(out.data, x + mixed, atol=1e-6)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

class TestRunSequenceModel:
    def test_none_is_identity(self):
        cfg = sm.SeqConfig("NONE", 0)
        x = np.random.default_rng(40).normal(size=(250, 960)).astype(np.float32)
        out = sm.run_sequence_model(cfg, WeightStore(), x)
        np.testing.assert_array_equal(out.data, x)

    def test_two_blocks_applied(self, monkeypatch):
        calls = []
        real = sm.tf_block

        def counting(x, weights, prefix="", num_heads=None):
            calls.append(prefix)
            return real(x, weights, prefix, num_heads)

        monkeypatch.setattr(sm, "tf_block", counting)
        cfg = sm.SeqConfig("TF", 8, num_blocks=2, num_heads=2)
        store = seq_store(cfg, seed=41)
        x = np.zeros((5, 8), np.float32)
        sm.run_sequence_model(cfg, store, x)
        assert calls == ["seq.block0.", "seq.block1."]

    @pytest.mark.parametrize("kind", ["TF", "ATT", "BIGRU", "TCN", "MAMBA", "HYBRID"])
    def test_shape_preserved_all_kinds(self, kind):
        cfg = sm.SeqConfig(kind, 8, num_blocks=2, num_heads=2, state_dim=16)
        store = seq_store(cfg, seed=42)
        x = np.random.default_rng(43).normal(size=(50, 8)).astype(np.float32)
        assert sm.run_sequence_model(cfg, store, x).shape == (50, 8)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown sequence model kind"):
            sm.SeqConfig("LSTM", 8)

    def test_width_mismatch_rejected(self):
        cfg = sm.SeqConfig("TF", 16, num_heads=2)
        with pytest.raises(ShapeError, match="hidden_dim"):
            sm.run_sequence_model(cfg, WeightStore(), np.zeros((5, 8), np.float32))


class TestSeqConfig:
    def test_heads_default_scales_with_hidden(self):
        assert sm.SeqConfig("TF", 256).heads == 4
        assert sm.SeqConfig("TF", 64).heads == 1
        assert sm.SeqConfig("TF", 1024).heads == 16

    def test_attention_divisibility_enforced(self):
        with pytest.raises(ValueError):
            sm.SeqConfig("ATT", 10, num_heads=3)

    def test_bigru_needs_even_hidden(self):
        with pytest.raises(ValueError):
            sm.SeqConfig("BIGRU", 7)
