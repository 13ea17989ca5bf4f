import numpy as np
import pytest

from src.core.exceptions import InvalidInputError, ShapeError
from src.models.encoder import (
    CROSS_LANG_FROM_VISION,
    CROSS_VISION_FROM_LANG,
    LANG_SELF,
    TRACE_KEYS,
    VISION_SELF,
    EncoderInputs,
    apply_norm,
    embed_objects,
    embed_words,
    encode,
    inter_modality_block,
    intra_modality_block,
    multi_head_attention,
)
from src.models.model import AlignmentModel
from src.numeric.tensor import Tensor
from src.schemas.config import ModelConfig


def test_output_shapes_and_traces(micro_model, micro_config, make_inputs, rng):
    inputs = make_inputs(rng, batch=3)
    output = micro_model.encode(inputs)
    assert output.objects.shape == (3, micro_config.num_objects, micro_config.d)
    assert output.words.shape == (3, micro_config.max_tokens, micro_config.d)
    assert output.cls.shape == (3, micro_config.d)
    assert set(output.traces) == set(TRACE_KEYS)
    assert len(output.traces[LANG_SELF]) == micro_config.lang_layers
    assert len(output.traces[VISION_SELF]) == micro_config.vision_layers
    cross = output.traces[CROSS_LANG_FROM_VISION]
    assert len(cross) == micro_config.cross_layers
    assert cross[0].shape == (3, micro_config.heads, micro_config.max_tokens, micro_config.num_objects)
    assert output.traces[CROSS_VISION_FROM_LANG][0].shape == (
        3, micro_config.heads, micro_config.num_objects, micro_config.max_tokens,
    )


def test_attention_rows_sum_to_one(micro_config, make_inputs, rng):
    """10,000 random inputs with random lengths, spread over ten parameter draws."""
    chunk = 1_000
    for seed in range(10):
        model = AlignmentModel.initialize(micro_config, seed=seed)
        lengths = rng.integers(1, micro_config.max_tokens + 1, size=chunk).tolist()
        output = model.encode(make_inputs(rng, batch=chunk, lengths=lengths))
        for maps in output.traces.values():
            for alpha in maps:
                assert alpha.shape[0] == chunk
                np.testing.assert_allclose(alpha.sum(axis=-1), 1.0, atol=1e-9)
                assert np.all(alpha >= 0.0)


def test_padding_keys_get_zero_attention(micro_model, make_inputs, rng):
    output = micro_model.encode(make_inputs(rng, batch=2, lengths=[3, 6]))
    lang = output.traces[LANG_SELF][0]
    assert np.all(lang[0, :, :, 3:] == 0.0)
    from_lang = output.traces[CROSS_VISION_FROM_LANG][-1]
    assert np.all(from_lang[0, :, :, 3:] == 0.0)


def test_vision_stack_is_permutation_equivariant(micro_model, micro_config, make_inputs, rng):
    inputs = make_inputs(rng, batch=1)
    perm = np.array([2, 0, 1])
    permuted = EncoderInputs(
        token_ids=inputs.token_ids,
        token_mask=inputs.token_mask,
        features=inputs.features[:, perm],
        boxes=inputs.boxes[:, perm],
    )
    base = micro_model.encode(inputs)
    moved = micro_model.encode(permuted)
    np.testing.assert_allclose(moved.objects.data, base.objects.data[:, perm], atol=1e-10)
    np.testing.assert_allclose(moved.words.data, base.words.data, atol=1e-10)
    np.testing.assert_allclose(
        moved.traces[CROSS_LANG_FROM_VISION][0], base.traces[CROSS_LANG_FROM_VISION][0][..., perm], atol=1e-10
    )


def test_word_positions_matter(micro_model, make_inputs, rng):
    inputs = make_inputs(rng, batch=1)
    ids = inputs.token_ids.copy()
    ids[0, [1, 2]] = ids[0, [2, 1]]
    if ids[0, 1] == ids[0, 2]:
        ids[0, 1] = 3 if ids[0, 2] != 3 else 4
    swapped = EncoderInputs(ids, inputs.token_mask, inputs.features, inputs.boxes)
    assert not np.allclose(micro_model.encode(swapped).words.data, micro_model.encode(inputs).words.data)


def test_identical_keys_give_uniform_attention(micro_model, micro_config, rng):
    x = Tensor(np.tile(rng.normal(size=(1, 1, micro_config.d)), (1, 4, 1)))
    _, alpha = multi_head_attention(x, x, np.ones((1, 4), dtype=bool), micro_model.params, "lang.0.attn", 2)
    np.testing.assert_allclose(alpha, 0.25, atol=1e-12)


def test_single_key_gets_all_weight(micro_model, micro_config, rng):
    q = Tensor(rng.normal(size=(1, 3, micro_config.d)))
    kv = Tensor(rng.normal(size=(1, 1, micro_config.d)))
    _, alpha = multi_head_attention(q, kv, np.ones((1, 1), dtype=bool), micro_model.params, "lang.0.attn", 2)
    np.testing.assert_array_equal(alpha, np.ones((1, 2, 3, 1)))


def test_zero_output_weights_reduce_block_to_double_norm(micro_config, rng):
    """With the attention and feed-forward outputs zeroed the block is LN(LN(x))."""
    model = AlignmentModel.initialize(micro_config, seed=3)
    params = model.params
    for name in ("lang.0.attn.o.w", "lang.0.attn.o.b", "lang.0.ffn.out.w", "lang.0.ffn.out.b"):
        params[name].assign(np.zeros(params[name].shape))
    x = Tensor(rng.normal(size=(2, 5, micro_config.d)))
    out, _ = intra_modality_block(x, np.ones((2, 5), dtype=bool), params, "lang.0", micro_config)
    eps = micro_config.layer_norm_eps
    expected = apply_norm(apply_norm(x, params, "lang.0.ln_attn", eps), params, "lang.0.ln_ffn", eps)
    np.testing.assert_allclose(out.data, expected.data, atol=1e-12)


def test_single_layer_stacks_equal_manual_composition(make_inputs, rng):
    config = ModelConfig(
        d=8, heads=2, lang_layers=1, vision_layers=1, cross_layers=1, max_tokens=6, num_objects=3,
        vocab_size=12, class_count=4, attribute_count=4, answer_count=5, feature_dim=5, ffn_mult=2,
    )
    model = AlignmentModel.initialize(config, seed=11)
    inputs = make_inputs(rng, batch=2, lengths=[6, 4])
    params, eps = model.params, config.layer_norm_eps

    s = embed_words(inputs.token_ids, params, eps)
    o = embed_objects(inputs.features, inputs.boxes, params, eps)
    s, _ = intra_modality_block(s, inputs.token_mask, params, "lang.0", config)
    o, _ = intra_modality_block(o, inputs.object_mask, params, "vision.0", config)
    s, o, _ = inter_modality_block(s, o, inputs.token_mask, inputs.object_mask, params, "cross.0", config)

    output = encode(inputs, params, config)
    np.testing.assert_array_equal(output.words.data, s.data)
    np.testing.assert_array_equal(output.objects.data, o.data)


def test_dropout_only_applies_with_a_generator(micro_config, make_inputs, rng):
    config = micro_config.model_copy(update={"dropout": 0.5})
    model = AlignmentModel.initialize(config, seed=1)
    inputs = make_inputs(rng, batch=1)
    plain = model.encode(inputs).words.data
    np.testing.assert_array_equal(model.encode(inputs).words.data, plain)
    assert not np.allclose(model.encode(inputs, np.random.default_rng(0)).words.data, plain)


def test_same_seed_same_parameters(micro_config):
    a = AlignmentModel.initialize(micro_config, seed=5).params
    b = AlignmentModel.initialize(micro_config, seed=5).params
    for name, tensor in a.items():
        np.testing.assert_array_equal(tensor.data, b[name].data)


def test_input_validation(micro_model, micro_config, make_inputs, rng):
    inputs = make_inputs(rng, batch=1)
    bad_ids = inputs.token_ids.copy()
    bad_ids[0, 1] = micro_config.vocab_size
    with pytest.raises(InvalidInputError):
        micro_model.encode(EncoderInputs(bad_ids, inputs.token_mask, inputs.features, inputs.boxes))

    boxes = inputs.boxes.copy()
    boxes[0, 0] = [0.5, 0.5, 0.5, 0.9]
    with pytest.raises(InvalidInputError):
        micro_model.encode(EncoderInputs(inputs.token_ids, inputs.token_mask, inputs.features, boxes))

    with pytest.raises(ShapeError):
        micro_model.encode(EncoderInputs(inputs.token_ids, inputs.token_mask, inputs.features[..., :2], inputs.boxes))


@pytest.mark.slow
def test_full_shape_forward_and_backward(rng):
    """Full-size encoder: one example through the total loss and back."""
    from src.models.heads import alignment_decoder
    from src.services.objectives import alignment_loss, matching_loss, total_loss

    config = ModelConfig.full(vocab_size=64, class_count=7, attribute_count=7, answer_count=19, feature_dim=32)
    model = AlignmentModel.initialize(config, seed=0)
    ids = rng.integers(3, 64, size=(1, config.max_tokens))
    ids[0, 0] = 0
    inputs = EncoderInputs(
        token_ids=ids,
        token_mask=np.ones((1, config.max_tokens), dtype=bool),
        features=rng.normal(size=(1, config.num_objects, 32)),
        boxes=np.tile([0.1, 0.1, 0.4, 0.5], (1, config.num_objects, 1)),
    )
    output = model.encode(inputs)
    prediction = alignment_decoder(output.objects, output.words, model.params, 3)
    targets = np.zeros((1, config.max_tokens, config.num_objects))
    targets[0, 1, 0] = 1.0
    valid = np.zeros((1, config.max_tokens), dtype=bool)
    valid[0, 1] = True
    parts = {
        "match": matching_loss(output.cls, np.array([1.0]), model.params),
        "align": alignment_loss(prediction, targets, valid),
    }
    bundle = total_loss(parts, {})
    model.params.zero_grad()
    bundle.total.backward()
    assert np.isfinite(bundle.total.item())
    assert np.any(model.params["lang.0.attn.q.w"].grad != 0.0)
