"""Five attribution families computed against the bundled classifier.

All methods return one score per model piece (subword); the emitter merges
pieces into words by summation. Sampling-based methods draw from an RNG
seeded per (model, seed, instance, method), so repeated exports are
byte-identical.

- lime: local linear surrogate fit on random piece-masking perturbations
  (model simplification family)
- shap: permutation-sampling Shapley values over piece presence
  (perturbation family)
- intgrad: integrated gradients along the path from a pad baseline,
  gradients taken as central finite differences of the class logit
  (gradient family)
- lrp: epsilon-rule relevance propagation through head, feed-forward, and
  attention-weighted value mixing, attention treated as constant weights
  (relevance-propagation family)
- amv: head-averaged per-layer attention mass, averaged over layers
  (attention-visualization family)
"""
from __future__ import annotations

import numpy as np

from .model import CLASSES, D_HEAD, N_HEADS, ModelOutput, TinyTextClassifier
from .tokenizer import MASK, stable_hash

METHODS = ("lime", "shap", "intgrad", "lrp", "amv")

LIME_SAMPLES = 64
LIME_RIDGE = 1e-3
SHAP_PERMUTATIONS = 24
IG_STEPS = 16
IG_FD_STEP = 1e-3
LRP_EPS = 1e-9


def method_rng(model: TinyTextClassifier, instance_id: str, method: str) -> np.random.Generator:
    return np.random.default_rng(
        stable_hash(f"{model.name}:{model.seed_id}:{instance_id}:{method}")
    )


def _class_index(predicted_class: str) -> int:
    return CLASSES.index(predicted_class)


def _prob(model: TinyTextClassifier, ids: list[int], class_idx: int) -> float:
    return float(model.forward(ids).probabilities[class_idx])


def lime_scores(
    model: TinyTextClassifier, ids: list[int], class_idx: int, rng: np.random.Generator
) -> np.ndarray:
    t = len(ids)
    mask_id = model.tokenizer.piece_id(MASK)
    designs = rng.random((LIME_SAMPLES, t)) < 0.5
    designs[0, :] = True  # anchor the fit at the unperturbed input
    targets = np.empty(LIME_SAMPLES)
    weights = np.empty(LIME_SAMPLES)
    for s in range(LIME_SAMPLES):
        masked = [i if keep else mask_id for i, keep in zip(ids, designs[s])]
        targets[s] = _prob(model, masked, class_idx)
        dropped = 1.0 - designs[s].mean()
        weights[s] = np.exp(-((dropped / 0.75) ** 2))
    z = np.column_stack([designs.astype(float), np.ones(LIME_SAMPLES)])
    zw = z * weights[:, None]
    gram = z.T @ zw + LIME_RIDGE * np.eye(t + 1)
    beta = np.linalg.solve(gram, z.T @ (weights * targets))
    return beta[:t]


def shap_scores(
    model: TinyTextClassifier, ids: list[int], class_idx: int, rng: np.random.Generator
) -> np.ndarray:
    t = len(ids)
    mask_id = model.tokenizer.piece_id(MASK)
    contributions = np.zeros(t)
    for _ in range(SHAP_PERMUTATIONS):
        order = rng.permutation(t)
        current = [mask_id] * t
        previous = _prob(model, current, class_idx)
        for piece in order:
            current[piece] = ids[piece]
            value = _prob(model, current, class_idx)
            contributions[piece] += value - previous
            previous = value
    return contributions / SHAP_PERMUTATIONS


def intgrad_scores(model: TinyTextClassifier, ids: list[int], class_idx: int) -> np.ndarray:
    x = model.embed(ids)
    baseline = model.embed([model.pad_id] * len(ids))
    direction = x - baseline  # positional parts cancel row-wise
    t = x.shape[0]
    scores = np.zeros(t)
    for step in range(IG_STEPS):
        alpha = (step + 0.5) / IG_STEPS
        z = baseline + alpha * direction
        for token in range(t):
            bump = np.zeros_like(z)
            bump[token] = IG_FD_STEP * direction[token]
            up = model.forward_embeddings(z + bump).logits[class_idx]
            down = model.forward_embeddings(z - bump).logits[class_idx]
            # directional derivative along this token's input delta
            scores[token] += (up - down) / (2.0 * IG_FD_STEP)
    return scores / IG_STEPS


def _linear_lrp(x: np.ndarray, w: np.ndarray, out: np.ndarray, r_out: np.ndarray) -> np.ndarray:
    denom = out + LRP_EPS * np.where(out >= 0, 1.0, -1.0)
    s = r_out / denom
    return x * (s @ w.T)


def _split_lrp(part_a: np.ndarray, part_b: np.ndarray, r_total: np.ndarray):
    total = part_a + part_b
    denom = total + LRP_EPS * np.where(total >= 0, 1.0, -1.0)
    return part_a / denom * r_total, part_b / denom * r_total


def lrp_scores(model: TinyTextClassifier, ids: list[int], class_idx: int) -> np.ndarray:
    output = model.forward(ids)
    t = output.embeddings.shape[0]
    # head: relevance of pooled dims is their signed contribution to the logit
    r_pool = output.pooled * model.head_w[:, class_idx]
    # mean pooling: token t contributes x2[t, d] / T to pool_d
    x2 = output.hidden[-1]["x2"]
    pool_denom = output.pooled + LRP_EPS * np.where(output.pooled >= 0, 1.0, -1.0)
    r = (x2 / t) / pool_denom * r_pool
    for l_i in reversed(range(len(model.layers))):
        layer = model.layers[l_i]
        state = output.hidden[l_i]
        r_x1, r_f = _split_lrp(state["x1"], state["f"], r)
        r_act = _linear_lrp(state["act"], layer["w2"], state["f"], r_f)
        # relu passes relevance straight through to its pre-activation input
        r_x1 += _linear_lrp(state["x1"], layer["w1"], state["pre_act"], r_act)
        r_x, r_z = _split_lrp(state["x"], state["z"], r_x1)
        r_concat = _linear_lrp(state["concat"], layer["o"], state["z"], r_z)
        for h in range(N_HEADS):
            r_head = r_concat[:, h * D_HEAD : (h + 1) * D_HEAD]
            attn = output.attentions[l_i, h]
            v = state["values"][h]
            out_h = attn @ v
            denom = out_h + LRP_EPS * np.where(out_h >= 0, 1.0, -1.0)
            r_v = v * (attn.T @ (r_head / denom))
            r_x += _linear_lrp(state["x"], layer["v"][h], v, r_v)
        r = r_x
    return r.sum(axis=1)


def amv_scores(model: TinyTextClassifier, ids: list[int]) -> np.ndarray:
    return attention_token_mass(model.forward(ids)).mean(axis=0)


def attention_token_mass(output: ModelOutput) -> np.ndarray:
    """Per-layer per-piece attention mass: head-average, then column means
    over query positions."""
    head_avg = output.attentions.mean(axis=1)  # (layers, T, T)
    return head_avg.mean(axis=1)  # (layers, T): mean over queries per key


def attribute(
    model: TinyTextClassifier, ids: list[int], method: str, predicted_class: str,
    instance_id: str,
) -> np.ndarray:
    class_idx = _class_index(predicted_class)
    if method == "lime":
        return lime_scores(model, ids, class_idx, method_rng(model, instance_id, method))
    if method == "shap":
        return shap_scores(model, ids, class_idx, method_rng(model, instance_id, method))
    if method == "intgrad":
        return intgrad_scores(model, ids, class_idx)
    if method == "lrp":
        return lrp_scores(model, ids, class_idx)
    if method == "amv":
        return amv_scores(model, ids)
    raise ValueError(f"unknown method {method!r}")
