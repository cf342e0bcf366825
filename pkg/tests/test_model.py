import numpy as np
import numpy.testing as npt
import pytest
from scipy.special import expit, softmax

from dygad.encoding import fuse_batch, table_gradients
from dygad.errors import ConfigError, DataError
from dygad.model import (AdamState, ModelParameters, adam_step, attention_layer,
                         backward, forward, load_checkpoint, save_checkpoint,
                         softmax_rows, stable_sigmoid)


def small_params(dim=4, layers=2, heads=2, seed=0, residual=False):
    return ModelParameters.init(dim, layers, heads, k=3, tau=2,
                                rng=np.random.default_rng(seed),
                                dist_cap=16, residual=residual)


# ---------------------------------------------------------------- primitives

def test_stable_sigmoid_matches_expit():
    x = np.linspace(-30, 30, 101)
    npt.assert_allclose(stable_sigmoid(x), expit(x), rtol=1e-14)


def test_stable_sigmoid_extremes():
    out = stable_sigmoid(np.array([-1e4, 0.0, 1e4]))
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 or out[0] < 1e-300
    assert out[1] == 0.5
    assert out[2] == 1.0


def test_softmax_rows_matches_scipy():
    rng = np.random.default_rng(0)
    s = rng.normal(size=(2, 3, 5, 5)) * 10
    npt.assert_allclose(softmax_rows(s), softmax(s, axis=-1), rtol=1e-13)


def test_softmax_rows_stable_at_huge_scores():
    s = np.array([[1e6, 1e6 - 1.0]])
    out = softmax_rows(s)
    assert np.all(np.isfinite(out))
    npt.assert_allclose(out.sum(axis=-1), 1.0, rtol=1e-15)


# ----------------------------------------------------------------- attention

def naive_attention(h, wq, wk, wv, heads):
    """Per-batch, per-head reference with explicit loops."""
    b, m, d = h.shape
    dh = d // heads
    out = np.zeros_like(h)
    for bi in range(b):
        q, k, v = h[bi] @ wq, h[bi] @ wk, h[bi] @ wv
        for hd in range(heads):
            cols = slice(hd * dh, (hd + 1) * dh)
            s = q[:, cols] @ k[:, cols].T / np.sqrt(dh)
            e = np.exp(s - s.max(axis=1, keepdims=True))
            out[bi, :, cols] = (e / e.sum(axis=1, keepdims=True)) @ v[:, cols]
    return out


@pytest.mark.parametrize("heads", [1, 2, 4])
def test_attention_matches_naive(heads):
    rng = np.random.default_rng(heads)
    h = rng.normal(size=(3, 6, 8))
    wq, wk, wv = (rng.normal(size=(8, 8)) for _ in range(3))
    out, _ = attention_layer(h, wq, wk, wv, heads)
    npt.assert_allclose(out, naive_attention(h, wq, wk, wv, heads), atol=1e-12)


def test_attention_rows_are_convex_combinations():
    # with w_v = I the output rows stay inside the convex hull of the inputs
    rng = np.random.default_rng(1)
    h = rng.normal(size=(1, 5, 4))
    out, _ = attention_layer(h, rng.normal(size=(4, 4)), rng.normal(size=(4, 4)),
                             np.eye(4), 1)
    assert out.min() >= h.min() - 1e-12
    assert out.max() <= h.max() + 1e-12


# ------------------------------------------------------------------- forward

def test_forward_shapes_and_score_range():
    params = small_params()
    x = np.random.default_rng(2).normal(size=(7, 5, 4))
    trace = forward(x, params)
    assert trace.pooled.shape == (7, 4)
    assert trace.logits.shape == (7,)
    assert trace.scores.shape == (7,)
    assert np.all((trace.scores > 0) & (trace.scores < 1))


def test_forward_single_window_matches_batch():
    params = small_params()
    x = np.random.default_rng(3).normal(size=(4, 5, 4))
    batch = forward(x, params)
    for i in range(4):
        single = forward(x[i], params)
        npt.assert_allclose(single.scores[0], batch.scores[i], rtol=1e-14)


def test_forward_rejects_wrong_dim():
    params = small_params()
    with pytest.raises(DataError):
        forward(np.zeros((2, 5, 3)), params)


def test_residual_changes_output():
    x = np.random.default_rng(4).normal(size=(2, 5, 4))
    plain = forward(x, small_params(residual=False)).logits
    res = forward(x, small_params(residual=True)).logits
    assert not np.allclose(plain, res)


def test_init_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        ModelParameters.init(4, 0, 1, 3, 2, rng, 16)
    with pytest.raises(ConfigError):
        ModelParameters.init(4, 1, 3, 3, 2, rng, 16)


# ------------------------------------------------------------------ backward

def fd_grad(objective, arr, eps=1e-6):
    """Central finite differences over every entry of ``arr`` (in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = arr[idx]
        arr[idx] = saved + eps
        fp = objective()
        arr[idx] = saved - eps
        fm = objective()
        arr[idx] = saved
        g[idx] = (fp - fm) / (2 * eps)
    return g


@pytest.mark.parametrize("residual", [False, True])
def test_backward_matches_finite_differences(residual):
    params = small_params(seed=5, residual=residual)
    rng = np.random.default_rng(6)
    x = rng.normal(size=(2, 5, 4))
    w = rng.normal(size=2)  # random linear functional of the scores

    def objective():
        return float(forward(x, params).scores @ w)

    trace = forward(x, params)
    grads = backward(trace, params, d_scores=w)
    pd = params.param_dict()
    for key in ("w_q.0", "w_k.1", "w_v.0", "w_s", "b_s"):
        fd = fd_grad(objective, pd[key])
        npt.assert_allclose(grads[key], fd, rtol=1e-5, atol=1e-9,
                            err_msg=f"gradient mismatch for {key}")
    fd_x = fd_grad(objective, x)
    npt.assert_allclose(grads["x"], fd_x, rtol=1e-5, atol=1e-9)


def test_backward_logit_and_score_routes_agree():
    params = small_params(seed=7)
    x = np.random.default_rng(8).normal(size=(3, 5, 4))
    trace = forward(x, params)
    w = np.array([1.0, -2.0, 0.5])
    via_scores = backward(trace, params, d_scores=w)
    s = trace.scores
    via_logits = backward(trace, params, d_logits=w * s * (1 - s))
    for key in via_scores:
        npt.assert_allclose(via_scores[key], via_logits[key], rtol=1e-12)


def test_backward_requires_exactly_one_seed_gradient():
    params = small_params()
    trace = forward(np.zeros((1, 5, 4)), params)
    with pytest.raises(ConfigError):
        backward(trace, params)
    with pytest.raises(ConfigError):
        backward(trace, params, d_logits=np.ones(1), d_scores=np.ones(1))


def test_table_gradients_through_model():
    # full chain: tables -> fused rows -> encoder -> score, spot-checked by FD
    params = small_params(seed=9)
    rng = np.random.default_rng(10)
    ranks = rng.integers(0, 5, size=(2, 10))
    dists = rng.integers(0, 18, size=(2, 10))
    rts = rng.integers(0, 2, size=(2, 10))
    w = rng.normal(size=2)

    def objective():
        x = fuse_batch(ranks, dists, rts, params.tables)
        return float(forward(x, params).scores @ w)

    x = fuse_batch(ranks, dists, rts, params.tables)
    trace = forward(x, params)
    grads = backward(trace, params, d_scores=w)
    tgrads = table_gradients(ranks, dists, rts, grads["x"], params.tables)
    for key, table in (("tables.diff", params.tables.diff),
                       ("tables.dist", params.tables.dist),
                       ("tables.temp", params.tables.temp)):
        flat = table.reshape(-1)
        want = tgrads[key].reshape(-1)
        for j in rng.choice(flat.size, size=8, replace=False):
            saved = flat[j]
            flat[j] = saved + 1e-6
            fp = objective()
            flat[j] = saved - 1e-6
            fm = objective()
            flat[j] = saved
            fd = (fp - fm) / 2e-6
            assert abs(want[j] - fd) <= 1e-5 * max(abs(fd), 1e-4), key


# ---------------------------------------------------------------------- adam

def test_adam_first_step_closed_form():
    # bias correction makes the first update -lr * g / (|g| + eps)
    for g in (1.0, -3.0, 0.25):
        p = np.array(10.0)
        m = np.array(0.0)
        v = np.array(0.0)
        adam_step(p, np.array(g), m, v, t=1, lr=0.01)
        want = 10.0 - 0.01 * g / (abs(g) + 1e-8)
        npt.assert_allclose(p, want, rtol=1e-14)


def test_adam_sequence_matches_reference():
    # independent scalar reimplementation of the update recurrences
    rng = np.random.default_rng(11)
    grads = rng.normal(size=10)
    p = np.array(1.0)
    m = np.array(0.0)
    v = np.array(0.0)
    rp, rm, rv = 1.0, 0.0, 0.0
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    for t, g in enumerate(grads, start=1):
        adam_step(p, np.array(g), m, v, t, lr, b1, b2, eps)
        rm = b1 * rm + (1 - b1) * g
        rv = b2 * rv + (1 - b2) * g * g
        rp -= lr * (rm / (1 - b1 ** t)) / (np.sqrt(rv / (1 - b2 ** t)) + eps)
        npt.assert_allclose(float(p), rp, rtol=1e-13)


def test_adam_state_skips_nonfinite():
    params = {"a": np.ones(3)}
    adam = AdamState(params, lr=0.1)
    before = params["a"].copy()
    ok = adam.step(params, {"a": np.array([1.0, np.nan, 0.0])})
    assert not ok
    assert adam.t == 0
    npt.assert_array_equal(params["a"], before)
    assert adam.step(params, {"a": np.ones(3)})
    assert adam.t == 1


# --------------------------------------------------------------- checkpoints

def test_checkpoint_roundtrip(tmp_path):
    params = small_params(seed=12)
    adam = AdamState(params.param_dict(), lr=0.003)
    adam.step(params.param_dict(),
              {k: np.ones_like(p) for k, p in params.param_dict().items()})
    config = {"epochs": 7, "diffusion": "ppr"}
    path = str(tmp_path / "ckpt.npz")
    save_checkpoint(path, params, config, adam)

    loaded, cfg, adam2 = load_checkpoint(path)
    assert cfg == config
    assert loaded.heads == params.heads
    assert loaded.residual == params.residual
    for key, arr in params.param_dict().items():
        npt.assert_array_equal(loaded.param_dict()[key], arr)
    assert adam2.t == 1
    assert adam2.lr == 0.003
    for key in adam.m:
        npt.assert_array_equal(adam2.m[key], adam.m[key])
        npt.assert_array_equal(adam2.v[key], adam.v[key])

    # the restored model must produce identical outputs
    x = np.random.default_rng(13).normal(size=(2, 5, 4))
    npt.assert_array_equal(forward(x, params).scores, forward(x, loaded).scores)


def test_checkpoint_without_optimizer(tmp_path):
    params = small_params()
    path = str(tmp_path / "c.npz")
    save_checkpoint(path, params, {})
    _, _, adam = load_checkpoint(path)
    assert adam is None


def test_checkpoint_missing_file():
    with pytest.raises(DataError):
        load_checkpoint("/nonexistent/nope.npz")


def test_checkpoint_rejects_foreign_npz(tmp_path):
    path = str(tmp_path / "junk.npz")
    np.savez(path, a=np.ones(3))
    with pytest.raises(DataError):
        load_checkpoint(path)
