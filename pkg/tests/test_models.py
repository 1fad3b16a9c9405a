import numpy as np
import pytest

import argbound.models as models_module
from argbound.autodiff import Prng, Tensor, gradient_check, gradient_check_report
from argbound.corpus import LabeledSentence
from argbound.crf import TAG_INDEX
from argbound.models import (
    ARG_CLASS,
    NON_ARG_CLASS,
    AttentionClassifierModel,
    BiLstmCrfModel,
    BiLstmTaggerModel,
    JointModel,
    build_model,
)


def _model(kind, table, seed=21, **kw):
    m = build_model(kind, table, Prng(seed), hidden=5, attention_hidden=6, dropout=0.0, **kw)
    m.set_training(False)
    return m


def _zero_params(model):
    for p in model.parameters():
        p.data[...] = 0.0


class TestBiLstmTagger:
    def test_rows_sum_to_one(self, small_table, sample_sentence):
        probs = _model("bilstm", small_table).tagger_forward(sample_sentence).data
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(len(sample_sentence)), atol=1e-12)

    def test_zero_weights_give_uniform_rows(self, small_table, sample_sentence):
        m = _model("bilstm", small_table)
        _zero_params(m)
        probs = m.tagger_forward(sample_sentence).data
        np.testing.assert_allclose(probs, np.full(probs.shape, 1 / 3), atol=1e-15)

    def test_gradient_check(self, small_table, sample_sentence):
        m = _model("bilstm", small_table)
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters()) < 1e-4

    def test_predict_decodes_argmax(self, small_table, sample_sentence):
        m = _model("bilstm", small_table)
        pred = m.predict(sample_sentence)
        probs = m.tagger_forward(sample_sentence).data
        expected = [("B", "I", "O")[int(i)] for i in probs.argmax(axis=1)]
        assert pred.tags == expected


class TestBiLstmCrfEmissions:
    def test_zero_weights_give_zero_emissions(self, small_table, sample_sentence):
        m = _model("bilstm-crf", small_table)
        _zero_params(m)
        np.testing.assert_array_equal(
            m.emissions(sample_sentence).data, np.zeros((len(sample_sentence), 3))
        )

    def test_rel_pos_shifts_all_rows_along_its_column(self, small_table):
        m = _model("bilstm-crf", small_table)
        tokens = ("t1", "t2", "t3")
        tags = ("O", "O", "O")
        p1 = m.emissions(LabeledSentence(tokens, tags, rel_pos=0.2)).data
        p2 = m.emissions(LabeledSentence(tokens, tags, rel_pos=0.9)).data
        s_column = m.conn_w.data[:, -1]
        for t in range(3):
            np.testing.assert_allclose(p2[t] - p1[t], 0.7 * s_column, atol=1e-12)

    def test_nll_gradient_check_through_bilstm(self, small_table, sample_sentence):
        m = _model("bilstm-crf", small_table)
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters()) < 1e-4


class TestAttentionPool:
    def test_single_token_attends_fully(self, small_table):
        m = _model("classifier", small_table)
        x = Tensor(Prng(3).normal((1, 8)))
        pooled, alphas = m.attention_pool(x)
        np.testing.assert_allclose(alphas.data, [1.0], atol=1e-15)
        np.testing.assert_allclose(pooled.data, x.data[0], atol=1e-15)

    def test_identical_tokens_get_uniform_weights(self, small_table):
        m = _model("classifier", small_table)
        row = Prng(4).normal((8,))
        x = Tensor(np.tile(row, (4, 1)))
        _, alphas = m.attention_pool(x)
        np.testing.assert_allclose(alphas.data, np.full(4, 0.25), atol=1e-12)

    def test_weights_sum_to_one(self, small_table, sample_sentence, rng):
        m = _model("classifier", small_table)
        for _ in range(10):
            x = Tensor(rng.normal((int(rng.integers(1, 7)), 8)))
            _, alphas = m.attention_pool(x)
            assert abs(alphas.data.sum() - 1.0) < 1e-12

    def test_attention_parameter_gradients(self, small_table, sample_sentence):
        m = _model("classifier", small_table)
        report = gradient_check_report(
            lambda: m.loss(sample_sentence), [m.attn_w, m.attn_b, m.attn_u]
        )
        assert max(report.values()) < 1e-4


class TestClassifier:
    def test_output_sums_to_one(self, small_table, sample_sentence):
        probs = _model("classifier", small_table).classify(sample_sentence).data
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_zero_weights_give_even_odds(self, small_table, sample_sentence):
        m = _model("classifier", small_table)
        _zero_params(m)
        np.testing.assert_allclose(
            m.classify(sample_sentence).data, [0.5, 0.5], atol=1e-15
        )

    def test_gradient_check_through_pooling_and_attention(self, small_table, sample_sentence):
        m = _model("classifier", small_table)
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters()) < 1e-4

    def test_predict_flag_and_probability(self, small_table, sample_sentence):
        m = _model("classifier", small_table)
        pred = m.predict(sample_sentence)
        probs = m.classify(sample_sentence).data
        assert pred.argumentative == (probs[ARG_CLASS] >= probs[NON_ARG_CLASS])
        assert abs(pred.arg_prob - probs[ARG_CLASS]) < 1e-15


class TestJointModel:
    def test_oracle_flag_changes_emissions(self, small_table):
        m = _model("joint", small_table, oracle_mode=True)
        tokens = ("t1", "t2", "t3")
        with_arg = LabeledSentence(tokens, ("B", "I", "O"), rel_pos=0.5)
        without_arg = LabeledSentence(tokens, ("O", "O", "O"), rel_pos=0.5)
        _, e1 = m.joint_forward(with_arg)
        _, e2 = m.joint_forward(without_arg)
        assert not np.allclose(e1.data, e2.data)

    def test_emissions_inside_tanh_range(self, small_table, sample_sentence):
        _, emissions = _model("joint", small_table).joint_forward(sample_sentence)
        assert np.all(np.abs(emissions.data) < 1.0)

    def test_full_gradient_check(self, small_table, sample_sentence):
        m = _model("joint", small_table)
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters()) < 1e-4

    def test_gradient_check_with_detached_status(self, small_table, sample_sentence):
        m = _model("joint", small_table, detach_p=True)
        hc, _ = m.joint_forward(sample_sentence)
        m.pinned_status_probs = hc.data.copy()
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters()) < 1e-4

    def test_loss_decomposes_into_head_losses(self, small_table, sample_sentence):
        from argbound.autodiff import cross_entropy_logits
        from argbound.crf import crf_nll

        m = _model("joint", small_table)
        total = m.loss(sample_sentence).item()
        parts = m._forward_parts(sample_sentence)
        target = ARG_CLASS if sample_sentence.argumentative else NON_ARG_CLASS
        ce = cross_entropy_logits(parts["logits"], target).item()
        nll = crf_nll(parts["emissions"], m.crf, [TAG_INDEX[t] for t in sample_sentence.tags]).item()
        assert abs(total - (ce + nll)) < 1e-12

    def test_loss_at_least_nll_component(self, small_table, sample_sentence):
        from argbound.crf import crf_nll

        m = _model("joint", small_table)
        parts = m._forward_parts(sample_sentence)
        nll = crf_nll(parts["emissions"], m.crf, [TAG_INDEX[t] for t in sample_sentence.tags]).item()
        assert m.loss(sample_sentence).item() >= nll - 1e-12

    def test_single_bilstm_pass_per_forward(self, small_table, sample_sentence, monkeypatch):
        m = _model("joint", small_table)
        calls = {"n": 0}
        original = models_module.bilstm_forward

        def counting(x, p):
            calls["n"] += 1
            return original(x, p)

        monkeypatch.setattr(models_module, "bilstm_forward", counting)
        m.loss(sample_sentence)
        assert calls["n"] == 1
        m.predict(sample_sentence)
        assert calls["n"] == 2

    def test_reduction_to_bilstm_crf_with_zero_status_columns(self, small_table, sample_sentence):
        joint = _model("joint", small_table, seed=31)
        crf_model = _model("bilstm-crf", small_table, seed=32)
        # Match every shared weight, then cut the two status columns.
        for gate in ("i", "f", "o", "g"):
            for direction in ("forward", "backward"):
                for field in ("w", "u", "b"):
                    src = getattr(crf_model.bilstm, direction)
                    dst = getattr(joint.bilstm, direction)
                    getattr(dst, field)[gate].data[...] = getattr(src, field)[gate].data
        joint.boundary_w.data[:, :-2] = crf_model.conn_w.data
        joint.boundary_w.data[:, -2:] = 0.0
        joint.boundary_b.data[...] = crf_model.conn_b.data
        _, joint_emissions = joint.joint_forward(sample_sentence)
        reduced = np.tanh(crf_model.emissions(sample_sentence).data)
        np.testing.assert_allclose(joint_emissions.data, reduced, atol=1e-12)

    def test_predict_deterministic_and_valid_tags(self, small_table, sample_sentence):
        m = _model("joint", small_table)
        first = m.predict(sample_sentence)
        second = m.predict(sample_sentence)
        assert first == second
        assert all(t in ("B", "I", "O") for t in first.tags)
        assert len(first.tags) == len(sample_sentence)

    def test_predict_invariant_to_dropout_config(self, small_table, sample_sentence):
        dropped = build_model(
            "joint", small_table, Prng(21), hidden=5, attention_hidden=6, dropout=0.5
        )
        clean = build_model(
            "joint", small_table, Prng(21), hidden=5, attention_hidden=6, dropout=0.0
        )
        dropped.set_training(True)  # predict must force inference masks
        assert dropped.predict(sample_sentence) == clean.predict(sample_sentence)

    def test_loss_weight_scales_classifier_term(self, small_table, sample_sentence):
        base = _model("joint", small_table, seed=41)
        heavy = _model("joint", small_table, seed=41, loss_weight_cls=2.0)
        from argbound.autodiff import cross_entropy_logits

        parts = base._forward_parts(sample_sentence)
        target = ARG_CLASS if sample_sentence.argumentative else NON_ARG_CLASS
        ce = cross_entropy_logits(parts["logits"], target).item()
        assert abs(heavy.loss(sample_sentence).item() - base.loss(sample_sentence).item() - ce) < 1e-12


class TestDropoutPlumbing:
    def test_training_loss_varies_with_dropout(self, small_table, sample_sentence):
        m = build_model("joint", small_table, Prng(5), hidden=5, attention_hidden=6, dropout=0.5)
        m.set_training(True)
        losses = {m.loss(sample_sentence).item() for _ in range(4)}
        assert len(losses) > 1

    def test_eval_loss_is_stable(self, small_table, sample_sentence):
        m = build_model("joint", small_table, Prng(5), hidden=5, attention_hidden=6, dropout=0.5)
        m.set_training(False)
        losses = {m.loss(sample_sentence).item() for _ in range(4)}
        assert len(losses) == 1

    def test_shared_masks_flag_supported(self, small_table, sample_sentence):
        m = build_model(
            "joint",
            small_table,
            Prng(5),
            hidden=5,
            attention_hidden=6,
            dropout=0.5,
            shared_dropout_masks=True,
        )
        m.set_training(True)
        assert np.isfinite(m.loss(sample_sentence).item())


class TestStackedEncoder:
    def test_two_layer_output_shape_and_params(self, small_table, sample_sentence):
        m = _model("bilstm-crf", small_table, num_layers=2)
        _, h = m.encode(sample_sentence)
        assert h.data.shape == (len(sample_sentence), 10)
        names = {p.name for p in m.parameters()}
        assert "bilstm.fwd.w_i" in names and "bilstm1.fwd.w_i" in names

    def test_two_layer_gradient_check(self, small_table, sample_sentence):
        # second-layer recurrence gradients run down to ~1e-8, where an
        # eps of 1e-5 is dominated by float64 roundoff; 1e-3 balances
        # truncation against roundoff for this composition
        m = _model("bilstm-crf", small_table, num_layers=2)
        assert gradient_check(lambda: m.loss(sample_sentence), m.parameters(), eps=1e-3) < 1e-4

    def test_single_layer_unchanged_by_knob(self, small_table, sample_sentence):
        a = _model("bilstm-crf", small_table, seed=9)
        b = _model("bilstm-crf", small_table, seed=9, num_layers=1)
        assert a.predict(sample_sentence) == b.predict(sample_sentence)

    def test_invalid_layer_count_rejected(self, small_table):
        with pytest.raises(ValueError, match="num_layers"):
            _model("bilstm", small_table, num_layers=0)


def test_unknown_model_kind_rejected(small_table):
    with pytest.raises(ValueError, match="unknown model kind"):
        build_model("transformer", small_table, Prng(1))


def test_model_classes_expose_kinds(small_table):
    assert BiLstmTaggerModel.kind == "bilstm"
    assert BiLstmCrfModel.kind == "bilstm-crf"
    assert AttentionClassifierModel.kind == "classifier"
    assert JointModel.kind == "joint"
