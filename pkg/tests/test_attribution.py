import numpy as np
import pytest

from civicml.attribution import (
    AttributionConfig,
    TokenAttribution,
    attribute_item,
    axiom_suite,
    integrated_gradients,
    path_integrated_gradients,
    token_attributions,
    top_tokens_per_class,
    _tanh_mlp_fn,
)
from civicml.data import EvidenceItem
from civicml.model import ModelConfig, init_model
from civicml.tokenizer import encode, train_vocab

@pytest.fixture(scope="module")
def toy_setup():
    vocab = train_vocab(["mice model cells tumor growth inhibitor response patients"] * 4, 80)
    cfg = ModelConfig(num_blocks=2, context_width=32, embed_dim=16, hidden_dim=24,
                      num_heads=4, vocab_size=len(vocab))
    model = init_model(cfg, seed=0)
    return model, vocab


def test_config_validation():
    with pytest.raises(ValueError):
        AttributionConfig(baseline_kind="nope")
    with pytest.raises(ValueError):
        AttributionConfig(steps=0)
    with pytest.raises(ValueError):
        AttributionConfig(target_class="F")
    assert AttributionConfig(target_class="C").class_index == 2


def test_identical_input_and_baseline_attributes_zero():
    w = np.array([1.0, -2.0, 3.0])
    x = np.array([0.5, 0.5, 0.5])
    ig = path_integrated_gradients(lambda z: (float(w @ z), w.copy()), x, x.copy(), 8)
    np.testing.assert_array_equal(ig, np.zeros(3))


def test_linear_model_exact_for_m_1():
    rng = np.random.default_rng(0)
    w = rng.normal(size=12)
    x = rng.normal(size=12)
    ig = path_integrated_gradients(lambda z: (float(w @ z), w.copy()), x, np.zeros(12), 1)
    np.testing.assert_allclose(ig, x * w, atol=1e-8, rtol=0)


def test_completeness_on_tanh_net_and_residual_shrinks():
    rng = np.random.default_rng(1)
    fn = _tanh_mlp_fn(rng.normal(size=(10, 6)), rng.normal(size=10))
    x = rng.normal(size=6)
    base = np.zeros(6)
    f_x, _ = fn(x)
    f_b, _ = fn(base)
    residuals = {}
    for m in (64, 128, 256, 512):
        ig = path_integrated_gradients(fn, x, base, m)
        residuals[m] = abs(ig.sum() - (f_x - f_b))
    assert residuals[512] <= 1e-3 * abs(f_x - f_b)
    assert residuals[128] < residuals[64]
    assert residuals[256] < residuals[128]


def test_token_attributions_sums_and_residual():
    matrix = np.zeros((4, 3))
    out = token_attributions(matrix, ["a", "b", "c", "d"], delta=0.0)
    assert all(t.score == 0.0 and t.completeness_residual == 0.0 for t in out)

    matrix[2] = [1.0, 2.0, 3.0]
    out = token_attributions(matrix, ["a", "b", "c", "d"], delta=6.0)
    assert out[2].score == pytest.approx(6.0)
    assert all(t.score == 0.0 for i, t in enumerate(out) if i != 2)
    assert out[0].completeness_residual == pytest.approx(0.0)

    fixture = np.arange(12.0).reshape(4, 3)
    out = token_attributions(fixture, list("wxyz"), delta=60.0)
    assert [t.score for t in out] == [3.0, 12.0, 21.0, 30.0]
    assert out[0].completeness_residual == pytest.approx(6.0)


def test_transformer_completeness_and_shared_pads_zero(toy_setup):
    model, vocab = toy_setup
    seq = encode(vocab, "mice model cells", 16, pad=True)
    config = AttributionConfig(baseline_kind="pad_sequence", steps=128, target_class="D")
    matrix, f_x, f_b = integrated_gradients(model, vocab, seq, config)
    assert matrix.shape == (16, model.config.embed_dim)
    # input pads coincide with baseline pads at interior positions -> exactly 0
    for pos in range(seq.attention_length, 15):
        assert np.all(matrix[pos] == 0.0)
    residual = abs(matrix.sum() - (f_x - f_b))
    assert residual <= 1e-3 * max(abs(f_x - f_b), 1e-9)


def test_transformer_zero_baseline_completeness(toy_setup):
    model, vocab = toy_setup
    seq = encode(vocab, "tumor growth inhibitor response", 16)
    config = AttributionConfig(baseline_kind="zero_embedding", steps=256, target_class="A")
    matrix, f_x, f_b = integrated_gradients(model, vocab, seq, config)
    assert abs(matrix.sum() - (f_x - f_b)) <= 1e-3 * max(abs(f_x - f_b), 1e-9)


def test_attribution_ignores_other_class_weights(toy_setup):
    model, vocab = toy_setup
    seq = encode(vocab, "mice model", 12)
    config = AttributionConfig(steps=32, target_class="B")
    m1, _, _ = integrated_gradients(model, vocab, seq, config)
    perturbed = model.copy()
    perturbed.params["cls_w"][:, 0] += 3.0
    perturbed.params["cls_w"][:, 3] -= 2.0
    m2, _, _ = integrated_gradients(perturbed, vocab, seq, config)
    np.testing.assert_allclose(m1, m2, atol=1e-12)


def test_attribute_item_produces_tokens(toy_setup):
    model, vocab = toy_setup
    out = attribute_item(model, vocab, "mice model cells", AttributionConfig(steps=16))
    assert out[0].token == "<bos>"
    assert all(isinstance(t, TokenAttribution) for t in out)


def test_top_tokens_single_item_is_its_ranking(toy_setup):
    model, vocab = toy_setup
    item = EvidenceItem(abstract="mice model cells tumor", pubmed_id=1,
                        labels=np.array([0, 0, 0, 1, 0], dtype=bool), source_evidence_ids=[1])
    per_item = attribute_item(model, vocab, item.abstract, AttributionConfig(steps=16, target_class="D"))
    specials = {"<bos>", "<eos>", "<mask>", "<pad>", "<unk>"}
    scores = {}
    for ta in per_item:
        if ta.token not in specials:
            scores[ta.token] = scores.get(ta.token, 0.0) + ta.score
    expect = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    top = top_tokens_per_class(model, vocab, [item], k=100, steps=16)
    assert top["D"] == [(t, pytest.approx(s)) for t, s in expect]
    # k larger than the scored token count returns the full list
    assert len(top["D"]) == len(expect)


def test_top_tokens_requires_items(toy_setup):
    model, vocab = toy_setup
    with pytest.raises(ValueError):
        top_tokens_per_class(model, vocab, [], k=5)


def test_axiom_suite_passes():
    report = axiom_suite(seed=0, steps=128)
    assert report["sensitivity_a"]["passed"]
    assert report["sensitivity_b"]["passed"]
    assert report["sensitivity_b"]["attribution_abs"] <= 1e-10
    assert report["implementation_invariance"]["passed"]
    assert report["implementation_invariance"]["max_diff"] <= 1e-8
    assert report["all_passed"]
