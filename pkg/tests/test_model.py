import numpy as np
import pytest

from oracles import plain_attention_layer
from srgt.autodiff import Tensor
from srgt.diffgraph import DiffGraph, EdgeKind, EdgeState
from srgt.model import SGTConfig, SGTModel, sinusoidal_encoding
from srgt.structures import PathPolicy, all_pairs_structures


def toy_structs(n=6, seed=0, max_spd=3):
    rng = np.random.default_rng(seed)
    edges = {}
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < 0.3:
                k = int(rng.integers(1, 5))
                kind = EdgeKind(int(rng.integers(1, 4)))
                edges[(u, v)] = EdgeState(kind, k, float(k))
    g = DiffGraph(n, edges)
    return all_pairs_structures(g, PathPolicy(max_spd=max_spd), k_max=8)


def small_model(n=6, seed=0, **kw):
    kw.setdefault("d", 8)
    kw.setdefault("d_e", 4)
    kw.setdefault("n_layers", 1)
    kw.setdefault("n_heads", 2)
    kw.setdefault("max_spd", 3)
    kw.setdefault("k_max", 8)
    cfg = SGTConfig(**kw)
    return SGTModel(n, cfg, np.random.default_rng(seed))


class TestConfig:
    def test_rejects_indivisible_heads(self):
        with pytest.raises(ValueError):
            SGTConfig(d=10, n_heads=4)

    def test_rejects_unknown_norm(self):
        with pytest.raises(ValueError):
            SGTConfig(attn_norm="sum")

    def test_rejects_zero_dims(self):
        with pytest.raises(ValueError):
            SGTConfig(n_layers=0)


class TestPositionalEncoding:
    def test_first_row_alternates(self):
        pe = sinusoidal_encoding(4, 6)
        assert np.array_equal(pe[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])

    def test_position_one_values(self):
        pe = sinusoidal_encoding(2, 4)
        assert abs(pe[1, 0] - np.sin(1.0)) < 1e-15
        assert abs(pe[1, 1] - np.cos(1.0)) < 1e-15
        assert abs(pe[1, 2] - np.sin(1.0 / 10000.0 ** 0.5)) < 1e-15

    def test_closed_form_grid(self):
        for length, dim in ((3, 4), (7, 8), (64, 64)):
            pe = sinusoidal_encoding(length, dim)
            for pos in range(length):
                for i in range(0, dim, 2):
                    angle = pos / 10000.0 ** (i / dim)
                    assert abs(pe[pos, i] - np.sin(angle)) < 1e-12
                    assert abs(pe[pos, i + 1] - np.cos(angle)) < 1e-12

    def test_values_bounded(self):
        pe = sinusoidal_encoding(32, 16)
        assert np.all(np.abs(pe) <= 1.0)


class TestAttention:
    def test_sp_variant_matches_plain_reference(self):
        rng = np.random.default_rng(42)
        for seed in range(5):
            model = small_model(seed=seed, use_topo_attr=False,
                               use_path_attr=False)
            h = Tensor(rng.normal(size=(6, 8)))
            out = model.sgt_layer(h, None, 0)
            lp = model.params.layer(0)
            ref = plain_attention_layer(h.data, lp["Wq"].data, lp["Wk"].data,
                                        lp["Wv"].data, lp["Wo"].data,
                                        lp["bo"].data, 2)
            assert np.allclose(out.data, ref, atol=1e-12)

    def test_structural_variant_requires_structs(self):
        model = small_model()
        with pytest.raises(ValueError):
            model.sgt_layer(Tensor(np.zeros((6, 8))), None, 0)

    def test_zero_modulation_weights_reduce_to_plain(self):
        model = small_model(seed=3)
        lp = model.params.layer(0)
        lp["Wlam"].data[...] = 0.0
        lp["Wsig"].data[...] = 0.0
        h = Tensor(np.random.default_rng(9).normal(size=(6, 8)))
        out = model.sgt_layer(h, toy_structs(), 0)
        ref = plain_attention_layer(h.data, lp["Wq"].data, lp["Wk"].data,
                                    lp["Wv"].data, lp["Wo"].data,
                                    lp["bo"].data, 2)
        assert np.allclose(out.data, ref, atol=1e-12)

    def test_modulation_changes_scores(self):
        model = small_model(seed=3)
        lp = model.params.layer(0)
        lp["Wsig"].data[...] = 1.0  # large offset so scores visibly move
        h = Tensor(np.random.default_rng(9).normal(size=(6, 8)))
        scores, _ = model.semantic_attention(h, 0)
        r = model.pair_features(toy_structs(), 0)
        modulated = model.structural_modulation(scores, r, 0)
        assert not np.allclose(modulated[0].data, scores[0].data)

    def test_rowsum_normalization(self):
        model = small_model(attn_norm="rowsum", use_topo_attr=False,
                            use_path_attr=False)
        a = Tensor(np.abs(np.random.default_rng(0).normal(size=(4, 4))) + 0.1)
        out = model._normalize(a)
        assert np.allclose(out.data.sum(axis=1), 1.0)

    def test_permutation_equivariance_without_structure(self):
        model = small_model(use_topo_attr=False, use_path_attr=False)
        rng = np.random.default_rng(4)
        h = rng.normal(size=(6, 8))
        perm = rng.permutation(6)
        out = model.sgt_layer(Tensor(h), None, 0).data
        out_p = model.sgt_layer(Tensor(h[perm]), None, 0).data
        assert np.allclose(out_p, out[perm], atol=1e-12)


class TestForwardStep:
    def test_residual_identity_with_zero_output_proj(self):
        model = small_model()
        lp = model.params.layer(0)
        lp["Wo"].data[...] = 0.0
        lp["bo"].data[...] = 0.0
        h = Tensor(np.random.default_rng(1).normal(size=(6, 8)))
        out = model.forward_step(h, toy_structs())
        assert np.allclose(out.data, h.data, atol=1e-15)

    def test_output_shape(self):
        model = small_model(n_layers=2)
        out = model.forward_step(model.params.X, toy_structs())
        assert out.shape == (6, 8)

    def test_nonfinite_activations_raise(self):
        model = small_model()
        h = Tensor(np.full((6, 8), np.nan))
        with pytest.raises(FloatingPointError):
            model.forward_step(h, toy_structs())

    def test_tied_layers_share_weights(self):
        model = small_model(n_layers=3, tie_layers=True)
        assert model.params.layer(0) is model.params.layer(2)
        assert len(model.params.layers) == 1


class TestLinkScore:
    def test_identical_embeddings_give_half(self):
        model = small_model()
        h = Tensor(np.ones((6, 8)))
        out = model.link_score(h, [0, 2], [1, 5])
        assert np.allclose(out.data, 0.5)

    def test_symmetric_in_pair_order(self):
        model = small_model(seed=7)
        h = Tensor(np.random.default_rng(2).normal(size=(6, 8)))
        ab = model.link_score(h, [0, 3], [1, 4]).data
        ba = model.link_score(h, [1, 4], [0, 3]).data
        assert np.allclose(ab, ba)

    def test_probabilities_in_unit_interval(self):
        model = small_model(seed=8)
        h = Tensor(np.random.default_rng(3).normal(size=(6, 8)) * 10)
        out = model.link_score(h, np.arange(6), np.roll(np.arange(6), 1)).data
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestParams:
    def test_names_unique(self):
        model = small_model(n_layers=2)
        names = [n for n, _ in model.params.named_parameters()]
        assert len(names) == len(set(names))

    def test_checkpoint_round_trip(self, tmp_path):
        model = small_model(seed=5)
        path = tmp_path / "m.ckpt"
        model.params.save(path)
        other = small_model(seed=6)
        other.params.load(path)
        for (na, pa), (nb, pb) in zip(model.params.named_parameters(),
                                      other.params.named_parameters()):
            assert na == nb
            assert np.array_equal(pa.data, pb.data)

    def test_load_rejects_shape_mismatch(self, tmp_path):
        model = small_model()
        path = tmp_path / "m.ckpt"
        model.params.save(path)
        bigger = small_model(d=16, d_e=4)
        with pytest.raises(ValueError, match="shape"):
            bigger.params.load(path)

    def test_frozen_embeddings_excluded_from_training(self):
        model = small_model(train_embeddings=False)
        names = {p.name for p in model.params.parameters()}
        assert "X" not in names
        assert not model.initial_state().requires_grad
