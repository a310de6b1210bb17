"""Structure-reinforced graph transformer.

Global self-attention over node states, per-pair structural encodings
(topology triple + shortest-path type/duration sequences), affine modulation
of the raw attention scores, recurrent residual updates across time slices,
and a link-scoring head on absolute feature differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, save_checkpoint, load_checkpoint
from .optim import Parameter
from .structures import N_TYPE_ROWS, PairStructureArrays


@dataclass
class SGTConfig:
    d: int = 32
    d_e: int = 16
    n_layers: int = 4
    n_heads: int = 4
    max_spd: int = 5
    k_max: int = 64
    conv_width: int = 3
    pe_base: float = 10000.0
    use_edge_types: bool = True
    use_edge_weights: bool = True
    use_diff_graph: bool = True
    use_topo_attr: bool = True
    use_path_attr: bool = True
    attn_norm: str = "softmax"  # or "rowsum"
    use_ffn: bool = False
    tie_layers: bool = False
    train_embeddings: bool = True

    def __post_init__(self):
        if self.d % self.n_heads != 0:
            raise ValueError("d must be divisible by n_heads")
        if min(self.d, self.d_e, self.n_layers, self.n_heads, self.max_spd) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.attn_norm not in ("softmax", "rowsum"):
            raise ValueError(f"unknown attn_norm {self.attn_norm!r}")


def sinusoidal_encoding(length: int, dim: int, base: float = 10000.0) -> np.ndarray:
    """pe[pos, 2i] = sin(pos / base^(2i/dim)), pe[pos, 2i+1] = cos(...)."""
    pe = np.zeros((length, dim))
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(0, dim, 2).astype(np.float64)
    angle = pos / base ** (i / dim)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe


class SGTParams:
    """All learnable weights, uniquely named, plus the initial embedding table."""

    def __init__(self, n_nodes: int, cfg: SGTConfig, rng: np.random.Generator):
        self.n_nodes = n_nodes
        self.cfg = cfg
        d, de, h = cfg.d, cfg.d_e, cfg.n_heads

        def p(name, shape, std):
            return Parameter(rng.normal(0.0, std, size=shape), name)

        def zeros(name, shape):
            return Parameter(np.zeros(shape), name)

        n_real = 1 if cfg.tie_layers else cfg.n_layers
        self.layers = []
        for i in range(n_real):
            pre = f"layer{i}."
            layer = {
                "Wq": p(pre + "Wq", (d, d), d ** -0.5),
                "Wk": p(pre + "Wk", (d, d), d ** -0.5),
                "Wv": p(pre + "Wv", (d, d), d ** -0.5),
                "Wo": p(pre + "Wo", (d, d), d ** -0.5),
                "bo": zeros(pre + "bo", (d,)),
                "Ws": p(pre + "Ws", (3, de), 0.1),
                "bs": zeros(pre + "bs", (de,)),
                "gamma_s": Parameter(np.ones(de), pre + "gamma_s"),
                "beta_s": zeros(pre + "beta_s", (de,)),
                "type_table": p(pre + "type_table", (N_TYPE_ROWS, de), 0.1),
                "dur_table": p(pre + "dur_table", (cfg.k_max + 1, de), 0.1),
                "conv_kernel": p(pre + "conv_kernel",
                                 (cfg.conv_width, de, de),
                                 (cfg.conv_width * de) ** -0.5),
                "conv_bias": zeros(pre + "conv_bias", (de,)),
                # small init keeps modulation near scale 1 / offset 0 at start
                "Wlam": p(pre + "Wlam", (2 * de, h), 0.01),
                "Wsig": p(pre + "Wsig", (2 * de, h), 0.01),
            }
            if cfg.use_ffn:
                layer["Wf1"] = p(pre + "Wf1", (d, 2 * d), d ** -0.5)
                layer["bf1"] = zeros(pre + "bf1", (2 * d,))
                layer["Wf2"] = p(pre + "Wf2", (2 * d, d), (2 * d) ** -0.5)
                layer["bf2"] = zeros(pre + "bf2", (d,))
            self.layers.append(layer)
        # entry normalization of the recurrent state keeps its scale bounded
        # across arbitrarily many residual updates
        self.gamma_h = Parameter(np.ones(d), "state_norm.gamma")
        self.beta_h = Parameter(np.zeros(d), "state_norm.beta")
        self.X = Parameter(rng.normal(0.0, 0.1, size=(n_nodes, d)), "X")
        self.W_head = p("head.W", (d, 1), d ** -0.5)
        self.b_head = zeros("head.b", (1,))

    def layer(self, i: int) -> dict:
        return self.layers[0 if self.cfg.tie_layers else i]

    def named_parameters(self):
        for layer in self.layers:
            for param in layer.values():
                yield param.name, param
        yield self.gamma_h.name, self.gamma_h
        yield self.beta_h.name, self.beta_h
        yield self.X.name, self.X
        yield self.W_head.name, self.W_head
        yield self.b_head.name, self.b_head

    def parameters(self, trainable_only: bool = True):
        for name, param in self.named_parameters():
            if trainable_only and name == "X" and not self.cfg.train_embeddings:
                continue
            yield param

    def save(self, path):
        save_checkpoint(path, {n: p.data for n, p in self.named_parameters()})

    def load(self, path):
        arrays = load_checkpoint(path)
        for name, param in self.named_parameters():
            if name not in arrays:
                raise ValueError(f"checkpoint missing parameter {name}")
            if arrays[name].shape != param.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}")
            param.data[...] = arrays[name]


class SGTModel:
    def __init__(self, n_nodes: int, cfg: SGTConfig, rng: np.random.Generator):
        self.n_nodes = n_nodes
        self.cfg = cfg
        self.params = SGTParams(n_nodes, cfg, rng)
        self._pe = sinusoidal_encoding(cfg.max_spd, cfg.d_e, cfg.pe_base)

    # -- building blocks ---------------------------------------------------

    def initial_state(self) -> Tensor:
        if self.cfg.train_embeddings:
            return self.params.X
        return self.params.X.detach()

    def semantic_attention(self, h_in: Tensor, layer_idx: int):
        """Per-head raw score matrices (pre-normalization) and the value tensor."""
        lp = self.params.layer(layer_idx)
        n, d = h_in.shape
        dh = d // self.cfg.n_heads
        q = ad.matmul(h_in, lp["Wq"])
        k = ad.matmul(h_in, lp["Wk"])
        v = ad.matmul(h_in, lp["Wv"])
        scores = []
        scale = 1.0 / np.sqrt(dh)
        for h in range(self.cfg.n_heads):
            qh = ad.narrow(q, 1, h * dh, dh)
            kh = ad.narrow(k, 1, h * dh, dh)
            scores.append(ad.mul(ad.matmul(qh, ad.transpose(kh)), scale))
        return scores, v

    def encode_topo(self, structs: PairStructureArrays, layer_idx: int) -> Tensor:
        """Layer-normed projection of [out-degree, in-degree, spd] per pair."""
        if not self.cfg.use_topo_attr:
            return Tensor(np.zeros((structs.n * structs.n, self.cfg.d_e)))
        lp = self.params.layer(layer_idx)
        proj = ad.add(ad.matmul(Tensor(structs.attrs), lp["Ws"]), lp["bs"])
        return ad.layer_norm(proj, lp["gamma_s"], lp["beta_s"])

    def encode_path(self, structs: PairStructureArrays, layer_idx: int) -> Tensor:
        """Type and duration embeddings along the path, fused, positioned, collapsed."""
        if not self.cfg.use_path_attr:
            return Tensor(np.zeros((structs.n * structs.n, self.cfg.d_e)))
        lp = self.params.layer(layer_idx)
        P, L = structs.type_ids.shape
        de = self.cfg.d_e
        r_e = ad.reshape(ad.embedding_lookup(lp["type_table"],
                                             structs.type_ids.ravel()), (P, L, de))
        r_w = ad.reshape(ad.embedding_lookup(lp["dur_table"],
                                             structs.dur_ids.ravel()), (P, L, de))
        r_p = ad.add(ad.mul(r_e, r_w), Tensor(self._pe[:L]))
        return ad.conv1d_collapse(r_p, lp["conv_kernel"], lp["conv_bias"],
                                  structs.mask)

    def pair_features(self, structs: PairStructureArrays, layer_idx: int) -> Tensor:
        return ad.concat([self.encode_topo(structs, layer_idx),
                          self.encode_path(structs, layer_idx)], axis=1)

    def structural_modulation(self, scores, r: Tensor, layer_idx: int):
        """Scale/offset each raw score: a -> lambda * a + sigma, per head."""
        lp = self.params.layer(layer_idx)
        n = scores[0].shape[0]
        # constant shift keeps lambda near 1 at init so training starts close
        # to plain attention
        lam = ad.add(ad.matmul(r, lp["Wlam"]), 1.0)
        sig = ad.matmul(r, lp["Wsig"])
        out = []
        for h, a in enumerate(scores):
            lam_h = ad.reshape(ad.narrow(lam, 1, h, 1), (n, n))
            sig_h = ad.reshape(ad.narrow(sig, 1, h, 1), (n, n))
            out.append(ad.add(ad.mul(lam_h, a), sig_h))
        return out

    def _normalize(self, a: Tensor) -> Tensor:
        if self.cfg.attn_norm == "softmax":
            return ad.softmax_rows(a)
        denom = ad.add(ad.tsum(a, axis=-1, keepdims=True), 1e-12)
        return ad.div(a, denom)

    def sgt_layer(self, h_in: Tensor, structs: PairStructureArrays | None,
                  layer_idx: int) -> Tensor:
        lp = self.params.layer(layer_idx)
        n, d = h_in.shape
        dh = d // self.cfg.n_heads
        scores, v = self.semantic_attention(h_in, layer_idx)
        use_structure = self.cfg.use_topo_attr or self.cfg.use_path_attr
        if use_structure:
            if structs is None:
                raise ValueError("structural features required but not provided")
            r = self.pair_features(structs, layer_idx)
            scores = self.structural_modulation(scores, r, layer_idx)
        heads = []
        for h, a in enumerate(scores):
            vh = ad.narrow(v, 1, h * dh, dh)
            heads.append(ad.matmul(self._normalize(a), vh))
        out = ad.add(ad.matmul(ad.concat(heads, axis=1), lp["Wo"]), lp["bo"])
        if self.cfg.use_ffn:
            hidden = ad.relu(ad.add(ad.matmul(out, lp["Wf1"]), lp["bf1"]))
            out = ad.add(out, ad.add(ad.matmul(hidden, lp["Wf2"]), lp["bf2"]))
        return out

    # -- recurrent update and scoring --------------------------------------

    def forward_step(self, h_prev: Tensor,
                     structs: PairStructureArrays | None) -> Tensor:
        """One time-slice update: stacked layers over the normalized state,
        then residual add of the unnormalized input."""
        h_cur = ad.layer_norm(h_prev, self.params.gamma_h, self.params.beta_h)
        for i in range(self.cfg.n_layers):
            h_cur = self.sgt_layer(h_cur, structs, i)
            if not np.isfinite(h_cur.data).all():
                raise FloatingPointError(f"non-finite activations at layer {i}")
        return ad.add(h_cur, h_prev)

    def link_score(self, h: Tensor, src, dst) -> Tensor:
        """Probability of each (src, dst) link from |h_src - h_dst|."""
        src = np.atleast_1d(np.asarray(src, dtype=np.int64))
        dst = np.atleast_1d(np.asarray(dst, dtype=np.int64))
        hi = ad.embedding_lookup(h, src)
        hj = ad.embedding_lookup(h, dst)
        feat = ad.tabs(ad.add(hi, ad.mul(hj, -1.0)))
        logits = ad.add(ad.reshape(ad.matmul(feat, self.params.W_head),
                                   (len(src),)), self.params.b_head)
        return ad.sigmoid(logits)
