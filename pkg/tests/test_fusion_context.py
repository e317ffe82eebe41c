"""Fusion weighting, classifier head, and context conditioning."""

import numpy as np
import pytest

from conftest import central_difference, grad_close
from gestar.context import (
    ContextConditioner,
    ContextEncoder,
    ContextInput,
    encode_context,
    refine,
)
from gestar.errors import ShapeError, ValidationError
from gestar.fusion import (
    Classifier,
    FusionWeights,
    GestureFeature,
    cross_entropy,
    fuse,
    fuse_embeddings,
)
from gestar.tensor import Tape, Tensor


class TestFusion:
    def test_degenerate_softmax_selects_one_modality(self):
        w = FusionWeights(3)
        w.raw.data = np.array([50.0, -50.0, -50.0])
        out = fuse_embeddings([np.array([1.0, 2.0]), np.array([9.0, 9.0]), np.array([-9.0, -9.0])], w)
        assert np.allclose(out.data, [1.0, 2.0], atol=1e-12)

    def test_equal_weights_hand_value(self):
        w = FusionWeights(3)  # zero raw weights -> 1/3 each
        feature = fuse(np.array([3.0, 0.0]), np.array([0.0, 3.0]), np.array([0.0, 0.0]), w)
        assert np.allclose(feature.vector, [1.0, 1.0], atol=1e-12)

    def test_equal_vectors_fixed_point(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=5)
        w = FusionWeights(3)
        w.raw.data = rng.normal(size=3)
        out = fuse_embeddings([x, x, x], w)
        assert np.allclose(out.data, x, atol=1e-12)

    def test_weights_live_on_simplex(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            w = FusionWeights(3)
            w.raw.data = rng.normal(scale=10, size=3)
            eff = w.effective_values()
            assert (eff >= 0).all()
            assert abs(eff.sum() - 1.0) < 1e-9

    def test_linearity_in_first_slot(self):
        rng = np.random.default_rng(2)
        w = FusionWeights(3)
        w.raw.data = rng.normal(size=3)
        a, e = rng.normal(size=4), rng.normal(size=4)
        v1, v2 = rng.normal(size=4), rng.normal(size=4)
        lhs = fuse_embeddings([v1 + v2, a, e], w).data
        rhs = (
            fuse_embeddings([v1, a, e], w).data
            + fuse_embeddings([v2, a, e], w).data
            - fuse_embeddings([np.zeros(4), a, e], w).data
        )
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        w = FusionWeights(3)
        with pytest.raises(ShapeError):
            fuse_embeddings([np.zeros(4), np.zeros(5), np.zeros(4)], w)


class TestClassifier:
    def test_zero_parameters_uniform(self):
        clf = Classifier(np.random.default_rng(0))
        clf.head.w.data = np.zeros_like(clf.head.w.data)
        clf.head.b.data = np.zeros_like(clf.head.b.data)
        probs = clf.probabilities(Tensor(np.random.default_rng(1).normal(size=(3, 32)))).data
        assert np.allclose(probs, 1.0 / 15.0, atol=1e-12)

    def test_argmax_matches_logits(self):
        rng = np.random.default_rng(2)
        clf = Classifier(rng)
        x = Tensor(rng.normal(size=(8, 32)))
        logits = clf.logits(x).data
        probs = clf.probabilities(x).data
        assert np.array_equal(np.argmax(logits, axis=1), np.argmax(probs, axis=1))

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(3)
        clf = Classifier(rng)
        probs = clf.probabilities(Tensor(rng.normal(size=(16, 32)) * 30)).data
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_cross_entropy_gradient(self):
        rng = np.random.default_rng(4)
        clf = Classifier(rng)
        x = rng.normal(size=(6, 32))
        labels = rng.integers(0, 15, 6)
        w0 = clf.head.w.data.copy()

        def f(flat):
            clf.head.w.data = flat.reshape(w0.shape)
            return cross_entropy(clf.logits(Tensor(x)), labels).item()

        clf.head.w.data = w0
        with Tape() as tape:
            loss = cross_entropy(clf.logits(Tensor(x)), labels)
        tape.backward(loss)
        grad = clf.head.w.grad.reshape(-1)
        flat = w0.reshape(-1)
        for i in rng.integers(0, flat.size, 10):
            assert grad_close(grad[i], central_difference(f, flat, int(i)))
        clf.head.w.data = w0


class TestContext:
    def test_identical_inputs_identical_embeddings(self):
        enc = ContextEncoder(np.random.default_rng(0))
        inp = ContextInput(lighting=0.7, fatigue=0.2)
        a = encode_context(inp, enc)
        b = encode_context(inp, enc)
        assert np.array_equal(a.vector, b.vector)

    def test_zero_parameters_zero_embedding(self):
        enc = ContextEncoder(np.random.default_rng(1))
        for _, p in enc.parameters():
            p.data = np.zeros_like(p.data)
        out = encode_context(ContextInput(0.5, 0.5), enc)
        assert np.allclose(out.vector, 0.0, atol=1e-12)

    def test_bias_only_embedding_with_bias_path(self):
        enc = ContextEncoder(np.random.default_rng(2), bias=True)
        for _, p in enc.parameters():
            p.data = np.zeros_like(p.data)
        enc.final.b.data = np.full_like(enc.final.b.data, 0.75)
        out = encode_context(ContextInput(0.1, 0.9), enc)
        assert np.allclose(out.vector, 0.75, atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            ContextInput(lighting=1.2, fatigue=0.0)
        enc = ContextEncoder(np.random.default_rng(3))
        with pytest.raises(ValidationError):
            enc(np.array([[0.5, 1.4]]))

    def test_token_permutation_invariance_without_positions(self):
        enc = ContextEncoder(np.random.default_rng(4))
        enc.pos_emb.data = np.zeros_like(enc.pos_emb.data)
        a = enc(np.array([[0.3, 0.8]])).data
        b = enc(np.array([[0.8, 0.3]])).data
        assert np.allclose(a, b, atol=1e-12)

    def test_gradient_check(self):
        rng = np.random.default_rng(5)
        enc = ContextEncoder(rng)
        channels = rng.random((3, 2))
        weights = rng.normal(size=8)
        params = enc.parameters()

        def f(vec):
            offset = 0
            for _, p in params:
                p.data = vec[offset : offset + p.size].reshape(p.data.shape).copy()
                offset += p.size
            return float((enc(channels).data * weights).sum())

        vec = np.concatenate([p.data.reshape(-1) for _, p in params])
        with Tape() as tape:
            loss = (enc(channels) * Tensor(weights)).sum()
        tape.backward(loss)
        grads = []
        for _, p in params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            grads.append(np.asarray(g).reshape(-1))
            p.grad = None
        grad = np.concatenate(grads)
        for i in rng.integers(0, vec.size, 10):
            assert grad_close(grad[i], central_difference(f, vec, int(i)))


class TestConditioner:
    def test_identity_at_initialization(self):
        cond = ContextConditioner(ctx_dim=8, feature_dim=32)
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4, 32))
        c = rng.normal(size=(4, 8))
        out = cond(Tensor(x), Tensor(c)).data
        assert np.array_equal(out, x)

    def test_constant_shift(self):
        cond = ContextConditioner(ctx_dim=8, feature_dim=32)
        cond.shift.b.data = np.full_like(cond.shift.b.data, 2.5)
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 32))
        out = cond(Tensor(x), Tensor(rng.normal(size=(3, 8)))).data
        assert np.allclose(out, x + 2.5, atol=1e-12)

    def test_refine_wrapper_identity(self):
        cond = ContextConditioner(ctx_dim=8, feature_dim=32)
        feat = GestureFeature(vector=np.arange(32.0))
        ctx = encode_context(ContextInput(0.4, 0.6), ContextEncoder(np.random.default_rng(2)))
        out = refine(feat, ctx, cond)
        assert np.array_equal(out.vector, feat.vector)

    def test_end_to_end_gradient_through_refine(self):
        rng = np.random.default_rng(3)
        cond = ContextConditioner(ctx_dim=8, feature_dim=32)
        # move off the zero init so the scale path is exercised
        cond.scale.w.data = rng.normal(size=cond.scale.w.data.shape) * 0.1
        cond.shift.w.data = rng.normal(size=cond.shift.w.data.shape) * 0.1
        x = rng.normal(size=(3, 32))
        c = rng.normal(size=(3, 8))
        w0 = cond.scale.w.data.copy()

        def f(flat):
            cond.scale.w.data = flat.reshape(w0.shape)
            return float((cond(Tensor(x), Tensor(c)).data ** 2).sum())

        cond.scale.w.data = w0
        with Tape() as tape:
            out = cond(Tensor(x), Tensor(c))
            loss = (out * out).sum()
        tape.backward(loss)
        grad = cond.scale.w.grad.reshape(-1)
        flat = w0.reshape(-1)
        for i in rng.integers(0, flat.size, 8):
            assert grad_close(grad[i], central_difference(f, flat, int(i)))
        cond.scale.w.data = w0
