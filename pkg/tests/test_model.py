import math
from collections import OrderedDict

import numpy as np
import pytest

from hypernews import autodiff as ad
from hypernews.autodiff import Tensor
from hypernews.errors import DataError, ShapeMismatch
from hypernews.hypergraph import propagation_operator
from hypernews.model import (
    ModelParams,
    classify,
    decode_users,
    encode_users,
    forward,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from hypernews.training import Problem, TrainConfig, init_params

from conftest import toy_hypergraph


def identity_params(d, t):
    params = ModelParams.init(d, d, d, t, np.random.default_rng(0))
    for name in ("enc.theta0", "enc.theta1", "dec.W1", "dec.W2", "dec.W3"):
        params[name].values[:] = np.eye(d)
    return params


def toy_problem(alpha=0.5, d=8, seed=0):
    hg = toy_hypergraph(seed=seed)
    return Problem(hg, TrainConfig(d=d, d_h=6, alpha=alpha))


class TestEncoderDecoder:
    def test_self_loop_passthrough(self, rng):
        op = propagation_operator([[i] for i in range(4)], node_count=4)
        X = rng.normal(size=(4, 3))
        Z = encode_users(op, Tensor(X), identity_params(3, 4))
        np.testing.assert_array_equal(Z.values, np.maximum(X, 0))

    def test_two_node_first_layer(self):
        op = propagation_operator([[0, 1]], node_count=2)
        params = identity_params(2, 1)
        h = ad.relu(ad.matmul(ad.propagate(op, Tensor(np.eye(2)), params["enc.edge_weight"]), params["enc.theta0"]))
        np.testing.assert_allclose(h.values, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_decoder_zero_and_identity(self, rng):
        params = identity_params(3, 2)
        Z = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(decode_users(Tensor(Z), params).values, np.maximum(Z, 0))
        for name in ("dec.W1", "dec.W2", "dec.W3"):
            params[name].values[:] = 0.0
        assert not decode_users(Tensor(Z), params).values.any()

    def test_reconstruction_gradient_through_decoder(self, rng):
        params = ModelParams.init(3, 5, 4, 2, rng)
        X, Z = rng.normal(size=(6, 3)), rng.normal(size=(6, 4))
        # nonzero biases keep pre-activations off the relu kink
        for name in ("dec.b1", "dec.b2", "dec.b3"):
            params[name].values[:] = rng.normal(scale=0.3, size=params[name].shape)
        for name in ("dec.W1", "dec.b2", "dec.W3"):
            def f(x, name=name):
                saved = params.tensors[name]
                params.tensors[name] = x
                try:
                    return ad.mse_loss(Tensor(X), decode_users(Tensor(Z), params))
                finally:
                    params.tensors[name] = saved
            assert ad.grad_check(f, params[name].values) < 1e-5

    def test_node_permutation_equivariance(self, rng):
        hg = toy_hypergraph()
        perm = rng.permutation(hg.node_count)
        params = ModelParams.init(3, 4, 4, 3, rng)
        Z1 = encode_users(propagation_operator(hg), Tensor(hg.node_attrs), params).values
        hg2 = hg.permute_nodes(perm)
        Z2 = encode_users(propagation_operator(hg2), Tensor(hg2.node_attrs), params).values
        assert np.allclose(Z2, Z1[_old_index(hg, hg2)], atol=1e-12)


def _old_index(old, new):
    where = {nid: i for i, nid in enumerate(old.node_ids)}
    return np.array([where[nid] for nid in new.node_ids])


class TestClassify:
    def test_prediction_rule(self):
        assert predict(np.array([[3.0, 1.0]])).tolist() == [0]
        assert predict(np.array([[2.0, 2.0], [-1.0, -1.0]])).tolist() == [0, 0]
        assert predict(np.array([[0.0, 1e-12]])).tolist() == [1]

    def test_softmax_rows_sum_to_one(self, rng):
        p = ad.softmax(rng.normal(scale=30, size=(50, 2)))
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-12

    def test_shapes(self, rng):
        params = ModelParams.init(3, 5, 4, 7, rng)
        logits, preds, fused = classify(Tensor(rng.normal(size=(7, 4))), Tensor(rng.normal(size=(7, 4))), params)
        assert logits.shape == (7, 2) and preds.shape == (7,) and fused.shape == (7, 8)
        with pytest.raises(ShapeMismatch):
            classify(Tensor(np.ones((7, 4))), Tensor(np.ones((6, 4))), params)


class TestForward:
    def test_output_shapes(self):
        pr = toy_problem()
        params = init_params(pr, 0)
        out = pr.forward(params, np.array([0, 1]))
        assert out.Z.shape == (6, 8) and out.X_hat.shape == (6, 3)
        assert out.U.shape == (3, 8) and out.Ze.shape == (3, 8) and out.logits.shape == (3, 2)
        for name in ("rec", "mi", "ce", "total"):
            assert getattr(out, name).shape == (1, 1)

    def test_total_composition(self):
        pr = toy_problem(alpha=0.5)
        out = pr.forward(init_params(pr, 1), np.array([0, 1, 2]))
        expect = (out.rec.item() + out.ce.item()) + 0.5 * out.mi.item()
        assert out.total.item() == pytest.approx(expect, abs=1e-14)

    def test_alpha_zero_is_exact(self):
        pr = toy_problem(alpha=0.0)
        out = pr.forward(init_params(pr, 1), np.array([0, 1, 2]))
        assert out.total.item() == out.rec.item() + out.ce.item()
        assert not out.mi.requires_grad

    def test_alpha_zero_gradients_ignore_mi(self):
        pr0 = toy_problem(alpha=0.0)
        params = init_params(pr0, 3)
        idx = np.array([0, 2])
        out = pr0.forward(params, idx)
        out.total.backward()
        g0 = [p.grad.copy() for p in params]
        for p in params:
            p.grad = None
        # same graph without any MI node at all
        out2 = pr0.forward(params, idx, mode="concat_no_mi")
        ad.add(out2.rec, out2.ce).backward()
        for a, p in zip(g0, params):
            np.testing.assert_array_equal(a, p.grad)

    def test_losses_nonnegative(self):
        for seed in range(5):
            pr = toy_problem(seed=seed)
            out = pr.forward(init_params(pr, seed), np.array([0, 1]))
            assert min(out.rec.item(), out.ce.item(), out.mi.item(), out.total.item()) >= 0

    def test_initial_cross_entropy_near_ln2(self):
        from hypernews.data import SyntheticConfig, generate_synthetic

        hg, _ = generate_synthetic(SyntheticConfig(m=300, t=80, seed=5))
        pr = Problem(hg, TrainConfig(d=32))
        idx = np.arange(hg.edge_count)
        for seed in range(20):
            ce = pr.forward(init_params(pr, seed), idx).ce.item()
            assert abs(ce - math.log(2)) <= 0.15, (seed, ce)

    def test_full_model_gradient(self):
        pr = toy_problem(d=8)
        params = init_params(pr, 4)
        params["enc.edge_weight"].values[:] = [[0.7, 1.3, 1.1]]
        idx = np.array([0, 1, 2])
        worst = 0.0
        for name in params.names():
            def f(x, name=name):
                saved = params.tensors[name]
                params.tensors[name] = x
                try:
                    return pr.forward(params, idx).total
                finally:
                    params.tensors[name] = saved
            worst = max(worst, ad.grad_check(f, params[name].values, h=1e-5))
        assert worst < 1e-4

    def test_edge_permutation_equivariance(self, rng):
        hg = toy_hypergraph()
        cfg = TrainConfig(d=8, d_h=6)
        pr = Problem(hg, cfg)
        params = init_params(pr, 2)
        order = np.array([2, 0, 1])
        pr2 = Problem(hg.permute_edges(order), cfg)
        params2 = params.copy()
        params2["enc.edge_weight"].values[:] = params["enc.edge_weight"].values[:, order]
        out1 = pr.forward(params, np.arange(3))
        out2 = pr2.forward(params2, np.arange(3))
        np.testing.assert_allclose(out2.logits.values, out1.logits.values[order], atol=1e-10)
        for name in ("rec", "ce", "mi", "total"):
            assert getattr(out2, name).item() == pytest.approx(getattr(out1, name).item(), abs=1e-10)

    def test_node_permutation_leaves_edge_outputs(self, rng):
        hg = toy_hypergraph()
        cfg = TrainConfig(d=8, d_h=6)
        params = init_params(Problem(hg, cfg), 2)
        perm = rng.permutation(hg.node_count)
        out1 = Problem(hg, cfg).forward(params, np.arange(3))
        out2 = Problem(hg.permute_nodes(perm), cfg).forward(params, np.arange(3))
        np.testing.assert_allclose(out2.U.values, out1.U.values, atol=1e-10)
        np.testing.assert_allclose(out2.logits.values, out1.logits.values, atol=1e-10)
        for name in ("rec", "ce", "mi", "total"):
            assert getattr(out2, name).item() == pytest.approx(getattr(out1, name).item(), abs=1e-10)

    def test_modes(self):
        pr = toy_problem()
        params = init_params(pr, 0)
        sem = pr.forward(params, np.arange(3), mode="sem_only")
        assert sem.U is None and sem.rec.item() == 0.0
        assert not sem.fused.values[:, 8:].any()
        cre = pr.forward(params, np.arange(3), mode="cre_only")
        assert not cre.fused.values[:, :8].any() and cre.mi.item() == 0.0
        with pytest.raises(ValueError):
            pr.forward(params, np.arange(3), mode="both")


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        params = ModelParams.init(3, 5, 4, 7, rng)
        path = tmp_path / "ckpt.npz"
        save_checkpoint(path, params, seed=11, config={"d": 4})
        loaded, meta = load_checkpoint(path)
        assert loaded.names() == params.names()
        for a, b in zip(params, loaded):
            assert a.values.tobytes() == b.values.tobytes() and a.shape == b.shape
        assert meta["seed"] == 11 and meta["version"] == 1 and len(meta["config_hash"]) == 64
        save_checkpoint(tmp_path / "again.npz", loaded, seed=11, config={"d": 4})
        assert (tmp_path / "again.npz").read_bytes() == path.read_bytes()

    def test_rejects_foreign_file(self, tmp_path):
        np.savez(tmp_path / "x.npz", meta=np.frombuffer(b'{"format": "other"}', dtype=np.uint8))
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "x.npz")
