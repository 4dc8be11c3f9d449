import numpy as np
import pytest

from samasa.autodiff import backward
from samasa.data import ContextInstance
from samasa.encoder import EncoderConfig
from samasa.model import Model, ModelConfig, apply_context_mode, strip_context
from samasa.training import TrainConfig, build_model
from synthetic import separable_dataset, separable_instance

TINY_ENC = EncoderConfig(layers=1, model_dim=16, heads=2, ff_dim=16, max_pieces=64, dropout=0.0)


def tiny_config(**overrides):
    base = dict(epochs=1, batch_size=8, dropout=0.0, seed=3, encoder=TINY_ENC,
                pair_dim=8, label_dim=8, dep_dim=8, subword_vocab_size=60)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def trained_bits():
    data = separable_dataset(8)
    model, store = build_model(tiny_config(), data)
    return model, store, data


def test_model_config_validation():
    with pytest.raises(ValueError, match="mandatory"):
        ModelConfig(num_types=4, heads=("morph",))
    with pytest.raises(ValueError, match="unknown heads"):
        ModelConfig(num_types=4, heads=("sacti", "frobnicate"))


def test_forward_shapes(trained_bits):
    model, store, data = trained_bits
    inst = data[0]
    out = model.forward(store, inst)
    n = len(inst.tokens)
    assert out.pair_matrix.shape == (n + 1, n + 1)
    assert out.label_matrix.shape == (n, 4)
    assert out.tag_logits["morph"].shape[0] == n
    assert out.dep.arc_scores.shape == (n, n + 1)


def test_instance_losses_all_heads(trained_bits):
    model, store, data = trained_bits
    losses = model.instance_losses(store, data[0], train=False)
    assert set(losses) == {"sacti", "morph", "dep"}
    for t in losses.values():
        assert np.isfinite(t.item())


def test_missing_aux_labels_mask_losses(trained_bits):
    model, store, _ = trained_bits
    bare = ContextInstance(tokens=["yasya", "pūrva0-para0", "yasya"], compound_index=1,
                           label="B").validate()
    losses = model.instance_losses(store, bare, train=False)
    assert set(losses) == {"sacti"}


def test_masked_aux_gradients_equal_type_only(trained_bits):
    model, store, _ = trained_bits
    bare = ContextInstance(tokens=["yasya", "pūrva0-para0", "yasya"], compound_index=1,
                           label="B").validate()

    store.zero_grads()
    losses = model.instance_losses(store, bare, train=False)
    from samasa.training import total_loss
    backward(total_loss(losses, tiny_config()))
    multi = {name: (store[name].grad.copy() if store[name].grad is not None else None)
             for name in store.names()}

    store.zero_grads()
    backward(model.instance_losses(store, bare, train=False)["sacti"])
    solo = {name: (store[name].grad.copy() if store[name].grad is not None else None)
            for name in store.names()}

    for name in multi:
        if multi[name] is None:
            assert solo[name] is None
        else:
            np.testing.assert_array_equal(multi[name], solo[name])


def test_predict_report_shape_and_invariants(trained_bits):
    model, store, data = trained_bits
    report = model.predict(store, data[0])
    n = len(data[0].tokens)
    assert report.label in model.type_vocab.names
    assert sum(report.confidence.values()) == pytest.approx(1.0, abs=1e-6)
    assert len(report.pair_label_distributions) == n
    for row in report.pair_label_distributions:
        assert sum(row) == pytest.approx(1.0, abs=1e-6)
    assert sum(report.pair_weights) == pytest.approx(1.0, abs=1e-6)
    assert len(report.morph_tags) == n
    assert len(report.dep_heads) == n
    hm = np.array(report.heatmaps["pair"])
    assert hm.shape == (n + 1, n + 1)
    np.testing.assert_allclose(hm.sum(axis=1), 1.0, atol=1e-6)
    att = np.array(report.heatmaps["attention"])
    assert att.shape == (n + 1, n + 1)
    np.testing.assert_allclose(att.sum(axis=1), 1.0, atol=1e-6)


def test_predict_deterministic(trained_bits):
    model, store, data = trained_bits
    a = model.predict(store, data[1]).to_json()
    b = model.predict(store, data[1]).to_json()
    assert a == b


def test_pooled_classifier_mode():
    data = separable_dataset(8)
    model, store = build_model(tiny_config(classifier="pooled", heads=("sacti", "morph")), data)
    losses = model.instance_losses(store, data[0], train=False)
    assert "sacti" in losses
    report = model.predict(store, data[0])
    assert report.label in model.type_vocab.names
    assert sum(report.confidence.values()) == pytest.approx(1.0, abs=1e-6)
    assert "pair" not in report.heatmaps


def test_all_aux_heads_wire_through_losses():
    data = separable_dataset(8)
    cfg = tiny_config(heads=("sacti", "morph", "dep", "case", "lemma", "relation"))
    model, store = build_model(cfg, data)
    losses = model.instance_losses(store, data[0], train=False)
    assert set(losses) == {"sacti", "morph", "dep", "case", "lemma", "relation"}
    import math

    # uniform-logits sanity: lemma head over |V| classes can't exceed ln|V| by much
    assert losses["lemma"].item() < math.log(len(model.tag_vocabs["lemma"])) + 2.0


def test_echo_round_trip(trained_bits):
    model, store, data = trained_bits
    clone = Model.from_echo(model.echo())
    assert clone.config == model.config
    assert clone.type_vocab.names == model.type_vocab.names
    assert clone.subword.pieces == model.subword.pieces
    # same parameters -> same outputs
    out_a = model.predict(store, data[2]).to_json()
    out_b = clone.predict(store, data[2]).to_json()
    assert out_a == out_b


def test_strip_context_keeps_single_token_tags():
    inst = separable_instance(0, "T")
    stripped = strip_context(inst)
    assert stripped.tokens == [inst.compound]
    assert stripped.compound_index == 0
    assert stripped.morph_tags == [inst.morph_tags[1]]
    assert stripped.dep_heads is None
    assert apply_context_mode(inst, "with") is inst
