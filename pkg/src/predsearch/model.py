"""Attention-based scoring network over bipartite MIP graphs.

Two rounds of multi-head message passing: constraints attend to their
incident variables, then variables attend back to constraints with a
separate parameter set. Attention scores use the attentive (v2-style)
ordering - leaky ReLU applied to the sum of projected source, target,
and edge embeddings before the dot product with the attention vector.
Heads have width L each and are concatenated then merged back to L, so
the parameter count scales as H*L^2. A two-layer head plus logistic
sigmoid turns variable embeddings into scores in (0, 1), masked to
integer variables.

Everything is plain float64 numpy with hand-written exact gradients;
the test suite checks them against central finite differences.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, fields, replace

import numpy as np

from .encoding import BipartiteGraph
from .errors import DimensionError, PredsearchError, ValidationError

LEAK = 0.2
CLIP_EPS = 1e-7

_MAGIC = b"PSGAT\x00"
_VERSION = 1


def _lrelu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAK * x)


def _dlrelu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, LEAK)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class GatParams:
    """All network weights. Field order defines the checkpoint layout."""

    embed_dim: int
    heads: int
    var_width: int
    cons_width: int
    edge_width: int
    identity_bits: int

    embed_var_w: np.ndarray
    embed_var_b: np.ndarray
    embed_cons_w: np.ndarray
    embed_cons_b: np.ndarray
    embed_edge_w: np.ndarray
    embed_edge_b: np.ndarray

    attn1_src: np.ndarray   # (H, L, L) projects variable embeddings
    attn1_dst: np.ndarray   # (H, L, L) projects constraint embeddings
    attn1_edge: np.ndarray  # (H, L, L)
    attn1_vec: np.ndarray   # (H, L)
    merge1_w: np.ndarray    # (L, H*L)
    merge1_b: np.ndarray

    attn2_src: np.ndarray
    attn2_dst: np.ndarray
    attn2_edge: np.ndarray
    attn2_vec: np.ndarray
    merge2_w: np.ndarray
    merge2_b: np.ndarray

    head_w1: np.ndarray     # (L, L)
    head_b1: np.ndarray
    head_w2: np.ndarray     # (L,)
    head_b2: np.ndarray     # (1,)

    def array_items(self) -> list[tuple[str, np.ndarray]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self) if f.type == "np.ndarray"]

    def num_parameters(self) -> int:
        return sum(a.size for _, a in self.array_items())

    def map_arrays(self, fn) -> "GatParams":
        return replace(self, **{name: fn(arr) for name, arr in self.array_items()})

    def zeros_like(self) -> "GatParams":
        return self.map_arrays(np.zeros_like)


def expected_parameter_count(L: int, H: int, d_v: int, d_c: int, d_e: int) -> int:
    """Closed-form size of the network; scales as Theta(H * L^2)."""
    embeddings = L * (d_v + d_c + d_e) + 3 * L
    per_round = 4 * H * L * L + H * L + L
    head = L * L + L + L + 1
    return embeddings + 2 * per_round + head


def init_params(L: int, H: int, d_v: int, d_c: int = 4, d_e: int = 1, seed: int = 0) -> GatParams:
    """Glorot-uniform initialization, deterministic in the seed.

    Weight matrices draw from U(-r, r) with r = sqrt(6 / (fan_in + fan_out));
    biases start at zero. Draws happen in checkpoint field order.
    """
    if L % H != 0:
        raise DimensionError(f"embed dim {L} must be divisible by the head count {H}")
    if d_v < 15:
        raise DimensionError(f"variable width {d_v} below the 15 base features")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0x6A7))))

    def glorot(shape, fan_in, fan_out):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-r, r, size=shape)

    def attn_block():
        return (
            glorot((H, L, L), L, L),
            glorot((H, L, L), L, L),
            glorot((H, L, L), L, L),
            glorot((H, L), L, 1),
            glorot((L, H * L), H * L, L),
            np.zeros(L),
        )

    a1s, a1d, a1e, a1v, m1w, m1b = attn_block()
    a2s, a2d, a2e, a2v, m2w, m2b = attn_block()
    params = GatParams(
        embed_dim=L,
        heads=H,
        var_width=d_v,
        cons_width=d_c,
        edge_width=d_e,
        identity_bits=d_v - 15,
        embed_var_w=glorot((L, d_v), d_v, L),
        embed_var_b=np.zeros(L),
        embed_cons_w=glorot((L, d_c), d_c, L),
        embed_cons_b=np.zeros(L),
        embed_edge_w=glorot((L, d_e), d_e, L),
        embed_edge_b=np.zeros(L),
        attn1_src=a1s,
        attn1_dst=a1d,
        attn1_edge=a1e,
        attn1_vec=a1v,
        merge1_w=m1w,
        merge1_b=m1b,
        attn2_src=a2s,
        attn2_dst=a2d,
        attn2_edge=a2e,
        attn2_vec=a2v,
        merge2_w=m2w,
        merge2_b=m2b,
        head_w1=glorot((L, L), L, L),
        head_b1=np.zeros(L),
        head_w2=glorot((L,), L, 1),
        head_b2=np.zeros(1),
    )
    expected = expected_parameter_count(L, H, d_v, d_c, d_e)
    assert params.num_parameters() == expected, "parameter count formula out of sync"
    return params


@dataclass(frozen=True)
class Prediction:
    """Per-variable scores in (0, 1); only entries with valid_mask set are
    meaningful (continuous variables are masked out)."""

    scores: np.ndarray
    valid_mask: np.ndarray


def _segment_softmax(score: np.ndarray, segment: np.ndarray, num_segments: int):
    mx = np.full((num_segments,) + score.shape[1:], -np.inf)
    np.maximum.at(mx, segment, score)
    ex = np.exp(score - mx[segment])
    den = np.zeros_like(mx)
    np.add.at(den, segment, ex)
    return ex / den[segment]


def _attention_round(src_emb, dst_emb, edge_emb, edge_src, edge_dst, num_dst, p_src, p_dst, p_edge, vec, merge_w, merge_b):
    """One round of multi-head attention; returns (output, cache)."""
    H, L = vec.shape
    S = np.einsum("hkl,nl->nhk", p_src, src_emb)
    T = np.einsum("hkl,ml->mhk", p_dst, dst_emb)
    G = np.einsum("hkl,el->ehk", p_edge, edge_emb)
    u = S[edge_src] + T[edge_dst] + G
    r = _lrelu(u)
    score = np.einsum("ehk,hk->eh", r, vec)
    alpha = _segment_softmax(score, edge_dst, num_dst)
    msg = np.zeros((num_dst, H, L))
    np.add.at(msg, edge_dst, alpha[:, :, None] * S[edge_src])
    concat = msg.reshape(num_dst, H * L)
    pre = concat @ merge_w.T + merge_b
    connected = np.zeros(num_dst, dtype=bool)
    connected[edge_dst] = True
    out = np.where(connected[:, None], _lrelu(pre), dst_emb)
    cache = dict(S=S, T=T, u=u, r=r, alpha=alpha, msg=msg, concat=concat, pre=pre, connected=connected)
    return out, cache


def _attention_round_backward(d_out, cache, src_emb, dst_emb, edge_emb, edge_src, edge_dst, p_src, p_dst, p_edge, vec, merge_w):
    """Gradients of one attention round; returns per-input and per-parameter grads."""
    H, L = vec.shape
    connected = cache["connected"]
    d_dst_passthrough = np.where(~connected[:, None], d_out, 0.0)
    d_pre = np.where(connected[:, None], d_out * _dlrelu(cache["pre"]), 0.0)
    d_merge_w = d_pre.T @ cache["concat"]
    d_merge_b = d_pre.sum(axis=0)
    d_msg = (d_pre @ merge_w).reshape(-1, H, L)

    S, alpha = cache["S"], cache["alpha"]
    dS = np.zeros_like(S)
    d_msg_edges = d_msg[edge_dst]
    d_alpha = np.einsum("ehk,ehk->eh", d_msg_edges, S[edge_src])
    np.add.at(dS, edge_src, alpha[:, :, None] * d_msg_edges)

    seg_dot = np.zeros((d_msg.shape[0], H))
    np.add.at(seg_dot, edge_dst, alpha * d_alpha)
    d_score = alpha * (d_alpha - seg_dot[edge_dst])

    d_vec = np.einsum("eh,ehk->hk", d_score, cache["r"])
    d_u = d_score[:, :, None] * vec[None, :, :] * _dlrelu(cache["u"])

    np.add.at(dS, edge_src, d_u)
    dT = np.zeros_like(cache["T"])
    np.add.at(dT, edge_dst, d_u)
    dG = d_u

    d_p_src = np.einsum("nhk,nl->hkl", dS, src_emb)
    d_src = np.einsum("nhk,hkl->nl", dS, p_src)
    d_p_dst = np.einsum("mhk,ml->hkl", dT, dst_emb)
    d_dst = np.einsum("mhk,hkl->ml", dT, p_dst) + d_dst_passthrough
    d_p_edge = np.einsum("ehk,el->hkl", dG, edge_emb)
    d_edge = np.einsum("ehk,hkl->el", dG, p_edge)
    return d_src, d_dst, d_edge, d_p_src, d_p_dst, d_p_edge, d_vec, d_merge_w, d_merge_b


def _forward_cached(params: GatParams, graph: BipartiteGraph):
    if graph.var_features.shape[1] != params.var_width:
        raise DimensionError(
            f"graph variable width {graph.var_features.shape[1]} != model width {params.var_width}"
        )
    if graph.cons_features.shape[1] != params.cons_width:
        raise DimensionError("constraint feature width mismatch")
    n, m, ne = graph.num_vars, graph.num_cons, graph.num_edges

    V0 = graph.var_features @ params.embed_var_w.T + params.embed_var_b
    C0 = graph.cons_features @ params.embed_cons_w.T + params.embed_cons_b
    E0 = graph.edge_features @ params.embed_edge_w.T + params.embed_edge_b

    cache: dict = dict(V0=V0, C0=C0, E0=E0, has_edges=ne > 0)
    if ne:
        C1, cache1 = _attention_round(
            V0, C0, E0, graph.edge_var, graph.edge_cons, m,
            params.attn1_src, params.attn1_dst, params.attn1_edge,
            params.attn1_vec, params.merge1_w, params.merge1_b,
        )
        V1, cache2 = _attention_round(
            C1, V0, E0, graph.edge_cons, graph.edge_var, n,
            params.attn2_src, params.attn2_dst, params.attn2_edge,
            params.attn2_vec, params.merge2_w, params.merge2_b,
        )
        cache.update(C1=C1, round1=cache1, round2=cache2)
    else:
        V1 = V0
    hid_pre = V1 @ params.head_w1.T + params.head_b1
    hid = _lrelu(hid_pre)
    logit = hid @ params.head_w2 + params.head_b2[0]
    scores = _sigmoid(logit)
    cache.update(V1=V1, hid_pre=hid_pre, hid=hid, logit=logit, scores=scores)
    return scores, cache


def forward(params: GatParams, graph: BipartiteGraph) -> Prediction:
    """Score every variable; entries are valid only on integer variables."""
    scores, _ = _forward_cached(params, graph)
    return Prediction(scores=scores, valid_mask=graph.integer_mask.copy())


def _labels_matrix(labels) -> np.ndarray:
    if hasattr(labels, "labels"):
        labels = labels.labels
    arr = np.asarray(labels, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def bce_loss(pred: Prediction, labels) -> float:
    """Sum of binary cross-entropies over all pool label vectors and all
    integer variables; scores are clipped to [1e-7, 1 - 1e-7] before logs."""
    y = _labels_matrix(labels)
    s = pred.scores[pred.valid_mask]
    if y.shape[1] != s.shape[0]:
        raise DimensionError(f"labels have width {y.shape[1]}, prediction has {s.shape[0]} integer scores")
    sc = np.clip(s, CLIP_EPS, 1.0 - CLIP_EPS)
    return float(-(y @ np.log(sc) + (1.0 - y) @ np.log(1.0 - sc)).sum())


def value_and_grad(params: GatParams, graph: BipartiteGraph, labels) -> tuple[float, GatParams]:
    """Loss and its exact gradient with respect to every parameter."""
    y = _labels_matrix(labels)
    scores, cache = _forward_cached(params, graph)
    mask = graph.integer_mask
    s = scores[mask]
    if y.shape[1] != s.shape[0]:
        raise DimensionError(f"labels have width {y.shape[1]}, prediction has {s.shape[0]} integer scores")
    k = y.shape[0]
    sc = np.clip(s, CLIP_EPS, 1.0 - CLIP_EPS)
    loss = float(-(y @ np.log(sc) + (1.0 - y) @ np.log(1.0 - sc)).sum())

    s_y = y.sum(axis=0)
    d_sc = -s_y / sc + (k - s_y) / (1.0 - sc)
    inside = (s > CLIP_EPS) & (s < 1.0 - CLIP_EPS)
    d_logit_masked = np.where(inside, d_sc * s * (1.0 - s), 0.0)
    d_logit = np.zeros(graph.num_vars)
    d_logit[mask] = d_logit_masked

    g = params.zeros_like()
    garr = {name: arr for name, arr in g.array_items()}

    hid, hid_pre, V1 = cache["hid"], cache["hid_pre"], cache["V1"]
    garr["head_w2"] += hid.T @ d_logit
    garr["head_b2"] += d_logit.sum(keepdims=True)
    d_hid = np.outer(d_logit, params.head_w2) * _dlrelu(hid_pre)
    garr["head_w1"] += d_hid.T @ V1
    garr["head_b1"] += d_hid.sum(axis=0)
    d_V1 = d_hid @ params.head_w1

    V0, C0, E0 = cache["V0"], cache["C0"], cache["E0"]
    d_V0 = np.zeros_like(V0)
    d_C0 = np.zeros_like(C0)
    d_E0 = np.zeros_like(E0)

    if cache["has_edges"]:
        (d_C1, d_V0_r2, d_E0_r2, d_p_src2, d_p_dst2, d_p_edge2, d_vec2, d_m2w, d_m2b) = _attention_round_backward(
            d_V1, cache["round2"], cache["C1"], V0, E0, graph.edge_cons, graph.edge_var,
            params.attn2_src, params.attn2_dst, params.attn2_edge, params.attn2_vec, params.merge2_w,
        )
        garr["attn2_src"] += d_p_src2
        garr["attn2_dst"] += d_p_dst2
        garr["attn2_edge"] += d_p_edge2
        garr["attn2_vec"] += d_vec2
        garr["merge2_w"] += d_m2w
        garr["merge2_b"] += d_m2b
        d_V0 += d_V0_r2
        d_E0 += d_E0_r2

        (d_V0_r1, d_C0_r1, d_E0_r1, d_p_src1, d_p_dst1, d_p_edge1, d_vec1, d_m1w, d_m1b) = _attention_round_backward(
            d_C1, cache["round1"], V0, C0, E0, graph.edge_var, graph.edge_cons,
            params.attn1_src, params.attn1_dst, params.attn1_edge, params.attn1_vec, params.merge1_w,
        )
        garr["attn1_src"] += d_p_src1
        garr["attn1_dst"] += d_p_dst1
        garr["attn1_edge"] += d_p_edge1
        garr["attn1_vec"] += d_vec1
        garr["merge1_w"] += d_m1w
        garr["merge1_b"] += d_m1b
        d_V0 += d_V0_r1
        d_C0 += d_C0_r1
        d_E0 += d_E0_r1
    else:
        d_V0 += d_V1

    garr["embed_var_w"] += d_V0.T @ graph.var_features
    garr["embed_var_b"] += d_V0.sum(axis=0)
    garr["embed_cons_w"] += d_C0.T @ graph.cons_features
    garr["embed_cons_b"] += d_C0.sum(axis=0)
    garr["embed_edge_w"] += d_E0.T @ graph.edge_features
    garr["embed_edge_b"] += d_E0.sum(axis=0)

    return loss, replace(g, **garr)


def grad(params: GatParams, graph: BipartiteGraph, labels) -> GatParams:
    return value_and_grad(params, graph, labels)[1]


# --------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class TrainState:
    step: int
    m: GatParams
    v: GatParams
    best_val_loss: float = np.inf

    @staticmethod
    def fresh(params: GatParams) -> "TrainState":
        return TrainState(step=0, m=params.zeros_like(), v=params.zeros_like())


BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


def adam_step(params: GatParams, grads: GatParams, state: TrainState, lr: float) -> tuple[GatParams, TrainState]:
    """One bias-corrected Adam update; returns new snapshots."""
    t = state.step + 1
    new_p, new_m, new_v = {}, {}, {}
    for (name, p), (_, gr), (_, m), (_, v) in zip(
        params.array_items(), grads.array_items(), state.m.array_items(), state.v.array_items()
    ):
        if p.shape != gr.shape:
            raise DimensionError(f"gradient shape mismatch on {name}")
        m2 = BETA1 * m + (1 - BETA1) * gr
        v2 = BETA2 * v + (1 - BETA2) * gr * gr
        mhat = m2 / (1 - BETA1**t)
        vhat = v2 / (1 - BETA2**t)
        new_p[name] = p - lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
        new_m[name] = m2
        new_v[name] = v2
    return (
        replace(params, **new_p),
        TrainState(step=t, m=replace(state.m, **new_m), v=replace(state.v, **new_v), best_val_loss=state.best_val_loss),
    )


# --------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    lr: float = 1e-3
    max_epochs: int = 50
    max_steps: int | None = None
    max_seconds: float | None = None
    seed: int = 0


@dataclass
class TrainHistory:
    steps: list[int]
    train_losses: list[float]
    val_losses: list[float]          # one entry per epoch
    best_val_loss: float
    best_epoch: int


def dataset_loss(params: GatParams, data) -> float:
    return sum(bce_loss(forward(params, g), y) for g, y in data)


def train(train_data, val_data, cfg: TrainConfig, params: GatParams | None = None,
          state: TrainState | None = None):
    """Train on (graph, labels) pairs; keep the snapshot with the lowest
    validation loss. Returns (best_params, best_state, history)."""
    import time as _time

    if not train_data or not val_data:
        raise ValidationError("training and validation datasets must be non-empty")
    g0 = train_data[0][0]
    if params is None:
        params = init_params(16, 4, g0.var_features.shape[1], seed=cfg.seed)
    if state is None:
        state = TrainState.fresh(params)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 0x7A41))))
    history = TrainHistory(steps=[], train_losses=[], val_losses=[], best_val_loss=np.inf, best_epoch=-1)
    best = (params, state)
    t0 = _time.monotonic()
    steps = 0
    stop = False
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train_data))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            total = 0.0
            grads = params.zeros_like()
            acc = {name: arr for name, arr in grads.array_items()}
            for idx in batch:
                graph, labels = train_data[idx]
                loss, g = value_and_grad(params, graph, labels)
                total += loss
                for name, arr in g.array_items():
                    acc[name] += arr
            if not np.isfinite(total):
                raise PredsearchError(f"training diverged at step {steps}: loss={total}")
            params, state = adam_step(params, replace(grads, **acc), state, cfg.lr)
            steps += 1
            history.steps.append(steps)
            history.train_losses.append(total)
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                stop = True
                break
            if cfg.max_seconds is not None and _time.monotonic() - t0 > cfg.max_seconds:
                stop = True
                break
        val = dataset_loss(params, val_data)
        history.val_losses.append(val)
        if val < history.best_val_loss:
            history.best_val_loss = val
            history.best_epoch = epoch
            best = (params, replace(state, best_val_loss=val))
        if stop:
            break
    return best[0], best[1], history


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: GatParams, state: TrainState, path) -> None:
    """Versioned binary checkpoint: magic, dims, parameter arrays, then
    optimizer state; all floats little-endian float64."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    dims = (
        _VERSION,
        params.embed_dim,
        params.heads,
        params.var_width,
        params.cons_width,
        params.edge_width,
        params.identity_bits,
        state.step,
    )
    buf.write(struct.pack("<8i", *dims))
    buf.write(struct.pack("<d", float(state.best_val_loss)))
    for bundle in (params, state.m, state.v):
        for _, arr in bundle.array_items():
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    from .util import atomic_write_bytes

    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path) -> tuple[GatParams, TrainState]:
    from pathlib import Path

    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise PredsearchError(f"{path}: not a checkpoint file (bad magic)")
    off = len(_MAGIC)
    version, L, H, d_v, d_c, d_e, bits, step = struct.unpack_from("<8i", raw, off)
    off += struct.calcsize("<8i")
    if version != _VERSION:
        raise PredsearchError(f"{path}: unsupported checkpoint version {version}")
    (best_val,) = struct.unpack_from("<d", raw, off)
    off += 8
    template = init_params(L, H, d_v, d_c, d_e, seed=0)
    if template.identity_bits != bits:
        raise PredsearchError(f"{path}: identity bit width {bits} inconsistent with var width {d_v}")

    def read_bundle():
        nonlocal off
        out = {}
        for name, arr in template.array_items():
            count = arr.size
            nbytes = count * 8
            if off + nbytes > len(raw):
                raise PredsearchError(f"{path}: truncated checkpoint while reading {name}")
            out[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(arr.shape).copy()
            off += nbytes
        return replace(template, **out)

    params = read_bundle()
    m = read_bundle()
    v = read_bundle()
    if off != len(raw):
        raise PredsearchError(f"{path}: {len(raw) - off} trailing bytes in checkpoint")
    return params, TrainState(step=step, m=m, v=v, best_val_loss=best_val)
