import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image
from torch.func import functional_call

from motionguide.core.exceptions import DimensionError, InvalidArgumentError
from motionguide.guidance.attention_dump import (
    CONSTANT_GRAY,
    attention_saliency,
    dump_attention,
    net_saliency,
)
from motionguide.guidance.encoder import (
    GuidanceEncoder,
    GuidanceNet,
    conv2d,
    fuse,
    self_attention,
)
from motionguide.utils.optimization import count_parameters

F64 = torch.float64


def rand(*shape, seed=0):
    return torch.rand(*shape, generator=torch.Generator().manual_seed(seed), dtype=F64)


def parameter_inputs(module):
    """Detached leaf copies of every trainable parameter, in registration order."""
    named = [(name, p.detach().clone().requires_grad_(True)) for name, p in module.named_parameters()]
    return [name for name, _ in named], tuple(p for _, p in named)


def small_net(**kwargs):
    torch.manual_seed(0)
    options = dict(out_channels=2, conv_channels=(4, 4), conv_strides=(1, 2))
    options.update(kwargs)
    return GuidanceNet(**options)


class TestConv2d:
    def test_centre_tap_is_identity(self):
        x = rand(1, 2, 5, 5)
        weight = torch.zeros(2, 2, 3, 3, dtype=F64)
        weight[0, 0, 1, 1] = weight[1, 1, 1, 1] = 1.0
        assert torch.equal(conv2d(x, weight, padding=1), x)

    def test_zero_padding_counts(self):
        out = conv2d(torch.ones(1, 1, 3, 3, dtype=F64), torch.ones(1, 1, 3, 3, dtype=F64), padding=1)
        expected = torch.tensor([[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]], dtype=F64)
        assert torch.equal(out[0, 0], expected)

    def test_replicate_padding_keeps_constants(self):
        out = conv2d(torch.full((1, 1, 4, 4), 2.0, dtype=F64), torch.ones(1, 1, 3, 3, dtype=F64), padding=1, padding_mode="replicate")
        assert torch.equal(out, torch.full((1, 1, 4, 4), 18.0, dtype=F64))

    def test_matches_loop_oracle(self):
        x = rand(1, 2, 5, 5, seed=1)
        weight = rand(3, 2, 3, 3, seed=2)
        bias = rand(3, seed=3)
        out = conv2d(x, weight, bias, stride=2, padding=1)
        padded = torch.zeros(1, 2, 7, 7, dtype=F64)
        padded[:, :, 1:6, 1:6] = x
        assert out.shape == (1, 3, 3, 3)
        for o in range(3):
            for i in range(3):
                for j in range(3):
                    acc = bias[o].item()
                    for c in range(2):
                        for a in range(3):
                            for b in range(3):
                                acc += weight[o, c, a, b].item() * padded[0, c, 2 * i + a, 2 * j + b].item()
                    assert out[0, o, i, j].item() == pytest.approx(acc, abs=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv2d(rand(1, 3, 4, 4), rand(2, 2, 3, 3))

    def test_kernel_larger_than_input(self):
        with pytest.raises(DimensionError):
            conv2d(rand(1, 1, 2, 2), rand(1, 1, 3, 3))


class TestSelfAttention:
    def test_rows_are_distributions(self):
        w = [rand(3, 3, seed=s) for s in range(3)]
        _, attention = self_attention(rand(2, 3, 2, 3, seed=9), *w)
        assert attention.shape == (2, 6, 6)
        assert torch.all(attention >= 0)
        torch.testing.assert_close(attention.sum(dim=-1), torch.ones(2, 6, dtype=F64), atol=1e-12, rtol=0)

    def test_constant_features_attend_uniformly(self):
        w = [rand(3, 3, seed=s) for s in range(3)]
        _, attention = self_attention(torch.full((1, 3, 2, 2), 0.7, dtype=F64), *w)
        torch.testing.assert_close(attention, torch.full((1, 4, 4), 0.25, dtype=F64), atol=1e-12, rtol=0)

    def test_zero_values_is_identity(self):
        x = rand(1, 3, 2, 2)
        w_q, w_k = rand(3, 3, seed=1), rand(3, 3, seed=2)
        out, _ = self_attention(x, w_q, w_k, torch.zeros(3, 3, dtype=F64))
        assert torch.equal(out, x)

    def test_matches_hand_unrolled(self):
        x = rand(1, 2, 1, 2, seed=4)
        w_q, w_k, w_v = (rand(2, 2, seed=s) for s in (5, 6, 7))
        out, _ = self_attention(x, w_q, w_k, w_v)
        tokens = [x[0, :, 0, n] for n in range(2)]
        q = [w_q @ t for t in tokens]
        k = [w_k @ t for t in tokens]
        v = [w_v @ t for t in tokens]
        for n in range(2):
            logits = [float(q[n] @ k[m]) / math.sqrt(2) for m in range(2)]
            weights = np.exp(logits) / np.exp(logits).sum()
            expected = tokens[n] + float(weights[0]) * v[0] + float(weights[1]) * v[1]
            torch.testing.assert_close(out[0, :, 0, n], expected, atol=1e-12, rtol=0)

    def test_projection_shape_checked(self):
        with pytest.raises(DimensionError):
            self_attention(rand(1, 3, 2, 2), rand(2, 2), rand(3, 3), rand(3, 3))


class TestGuidanceNet:
    def test_fresh_output_is_exactly_zero(self):
        net = small_net()
        out = net(rand(2, 3, 8, 8))
        assert out.shape == (2, 2, 4, 4)
        assert torch.count_nonzero(out) == 0

    def test_stores_attention(self):
        net = small_net()
        net(rand(1, 3, 8, 8))
        assert net.last_feature_size == (4, 4)
        assert net.last_attention.shape == (1, 16, 16)

    def test_without_attention(self):
        net = small_net(use_attention=False)
        net(rand(1, 3, 8, 8))
        assert net.attention is None and net.last_attention is None

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            small_net()(rand(1, 2, 8, 8))

    def test_gradients_match_finite_differences(self):
        net = small_net()
        torch.nn.init.normal_(net.out_layer.weight, std=0.5)
        assert count_parameters([net]) <= 5000
        x = rand(1, 3, 4, 4).requires_grad_(True)
        assert torch.autograd.gradcheck(net, (x,), eps=1e-6, atol=1e-5)

    @pytest.mark.parametrize("use_attention", [True, False])
    def test_parameter_gradients_match_finite_differences(self, use_attention):
        net = small_net(use_attention=use_attention)
        torch.nn.init.normal_(net.out_layer.weight, std=0.5)
        torch.nn.init.normal_(net.out_layer.bias, std=0.5)
        x = rand(1, 3, 4, 4, seed=7)
        names, values = parameter_inputs(net)
        assert all(v.dtype == F64 for v in values)

        def output(*params):
            return functional_call(net, dict(zip(names, params)), (x,))

        assert torch.autograd.gradcheck(output, values, eps=1e-6, atol=1e-6, rtol=1e-4)

    def test_attention_weights_gradients(self):
        x = rand(1, 2, 2, 2, seed=3)
        weights = tuple(rand(2, 2, seed=s).requires_grad_(True) for s in (4, 5, 6))
        assert torch.autograd.gradcheck(lambda a, b, c: self_attention(x, a, b, c)[0], weights, eps=1e-6, atol=1e-5)


class TestFuse:
    def test_mapping_summed_in_canonical_order(self):
        a, b, c = rand(1, 2, 2, 2, seed=1), rand(1, 2, 2, 2, seed=2), rand(1, 2, 2, 2, seed=3)
        y = fuse({"skeleton": a, "normal": b, "depth": c})
        assert torch.equal(y, (c + b) + a)

    def test_single_condition_is_identity(self):
        a = rand(1, 2, 2, 2)
        assert torch.equal(fuse({"semantic": a}), a)

    @settings(max_examples=25, deadline=None)
    @given(st.permutations(["depth", "normal", "semantic", "skeleton"]))
    def test_insertion_order_irrelevant(self, names):
        tensors = {name: rand(1, 1, 2, 2, seed=i) for i, name in enumerate(sorted(names))}
        assert torch.equal(fuse({name: tensors[name] for name in names}), fuse(tensors))

    @given(st.permutations(["depth", "normal", "semantic"]))
    def test_pair_order_irrelevant_under_cancellation(self, names):
        # 1e16 + 1 rounds away, so the sum depends on the order it is taken in
        values = {
            "depth": torch.full((1, 1, 1, 1), 1e16, dtype=F64),
            "normal": torch.full((1, 1, 1, 1), -1e16, dtype=F64),
            "semantic": torch.full((1, 1, 1, 1), 1.0, dtype=F64),
        }
        y = fuse([(name, values[name]) for name in names])
        assert float(y) == 1.0

    def test_pairs_match_mapping(self):
        a, b = rand(1, 2, 2, 2, seed=1), rand(1, 2, 2, 2, seed=2)
        assert torch.equal(fuse([("skeleton", a), ("depth", b)]), fuse({"depth": b, "skeleton": a}))

    def test_bare_tensors_rejected(self):
        with pytest.raises(InvalidArgumentError, match="pairs"):
            fuse([rand(1, 1, 1, 1), rand(1, 1, 1, 1)])

    def test_duplicate_name(self):
        with pytest.raises(InvalidArgumentError, match="twice"):
            fuse([("depth", rand(1, 1, 1, 1)), ("depth", rand(1, 1, 1, 1))])

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            fuse({})

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            fuse([("depth", rand(1, 2, 2, 2)), ("normal", rand(1, 2, 3, 3))])

    def test_unknown_name(self):
        with pytest.raises(InvalidArgumentError):
            fuse({"pose": rand(1, 1, 1, 1)})


class TestGuidanceEncoder:
    def test_fresh_encoder_outputs_zero(self):
        torch.manual_seed(0)
        encoder = GuidanceEncoder(conv_channels=(4,), conv_strides=(2,))
        bundle = {name: rand(2, 3, 8, 8, seed=i) for i, name in enumerate(encoder.conditions)}
        y = encoder(bundle)
        assert y.shape == (2, 4, 4, 4)
        assert torch.count_nonzero(y) == 0

    def test_conditions_kept_in_canonical_order(self):
        encoder = GuidanceEncoder(conditions=("skeleton", "depth"), conv_channels=(4,), conv_strides=(1,))
        assert encoder.conditions == ("depth", "skeleton")
        assert list(encoder.nets) == ["depth", "skeleton"]

    def test_missing_condition(self):
        encoder = GuidanceEncoder(conditions=("depth", "normal"), conv_channels=(4,), conv_strides=(1,))
        with pytest.raises(DimensionError):
            encoder({"depth": rand(1, 3, 4, 4)})

    def test_spatial_size_mismatch(self):
        encoder = GuidanceEncoder(conditions=("depth", "normal"), conv_channels=(4,), conv_strides=(1,))
        with pytest.raises(DimensionError):
            encoder({"depth": rand(1, 3, 4, 4), "normal": rand(1, 3, 6, 6)})

    def test_invalid_selection(self):
        with pytest.raises(InvalidArgumentError):
            GuidanceEncoder(conditions=())


class TestAttentionDump:
    def test_constant_condition_is_mid_gray(self, tmp_path):
        net = small_net()
        image = dump_attention(net, torch.full((1, 3, 8, 8), 0.3, dtype=F64), tmp_path / "attn.png")
        assert image.shape == (4, 4)
        assert np.all(image == CONSTANT_GRAY)

    def test_png_matches_returned_image(self, tmp_path):
        net = small_net()
        image = dump_attention(net, rand(1, 3, 8, 8, seed=5), tmp_path / "attn.png")
        assert np.array_equal(np.asarray(Image.open(tmp_path / "attn.png")), image)
        assert image.min() == 0 and image.max() == 255

    def test_saliency_is_column_sum(self):
        attention = torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=F64)
        assert attention_saliency(attention, 1, 2).tolist() == [[1.0, 0.0]]

    def test_requires_attention(self):
        with pytest.raises(InvalidArgumentError):
            net_saliency(small_net(use_attention=False), rand(1, 3, 8, 8))

    def test_requires_forward_pass(self):
        with pytest.raises(InvalidArgumentError):
            net_saliency(small_net())

    def test_grid_mismatch(self):
        with pytest.raises(DimensionError):
            attention_saliency(torch.eye(4, dtype=F64), 3, 3)
