"""Training losses for the matching stage (double-visible, unreliable-region,
to-refine-region), smooth L1, analytic gradients back to the feature
transform, and a small Adam loop to fit it."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (DisparityField, DisparityRange, downsample_average,
                   round_half_away)
from .features import (FeatureMap, FeatureTransform, NORM_EPS,
                       extract_census_gradient)
from .filtering import RegionPartition, derive_regions
from .matcher import (CostVolume, MapEstimate, ProbabilityVolume,
                      build_cost_volume, map_disparity, neighbor_probs,
                      softmax_over_disparity)

LOG_FLOOR = 1e-12


@dataclass
class LossBreakdown:
    dvr: float
    ur: float
    trr: float
    n_v: int
    n_u: int
    n_t: int

    @property
    def total(self) -> float:
        return self.dvr + self.ur + self.trr


def tent_weights(d_gt: float):
    """Triangle weights over the three candidates around t = round(d_gt).

    Returns (t, weights for offsets (-1, 0, +1)); weights are nonnegative and
    sum to 1, peaking at the candidate nearest the ground truth.
    """
    if not np.isfinite(d_gt):
        raise ValueError("d_gt must be finite")
    t = int(round_half_away(d_gt))
    deltas = np.array([-1.0, 0.0, 1.0])
    raw = np.maximum(0.0, 1.0 - np.abs(d_gt - (t + deltas)))
    return t, raw / raw.sum()


def _tent_raw(gt_vals: np.ndarray):
    """Vectorized tent: (t, raw weights (..., 3)) for offsets (-1, 0, +1)."""
    t = round_half_away(gt_vals)
    deltas = np.array([-1.0, 0.0, 1.0])
    raw = np.maximum(0.0, 1.0 - np.abs(gt_vals[..., None] - (t[..., None] + deltas)))
    return t.astype(np.int64), raw


def loss_dvr(pv: ProbabilityVolume, gt: DisparityField,
             regions: RegionPartition):
    """Weighted cross-entropy on the three candidates around the ground truth,
    averaged over the double-visible region.

    Returns (value, gradient w.r.t. the probability volume). Out-of-range
    neighbor candidates have their weight redistributed to in-range ones.
    """
    probs = pv.probs
    h, w, m = probs.shape
    V = regions.double_visible & gt.valid
    n_v = int(V.sum())
    grad = np.zeros_like(probs)
    if n_v == 0:
        return 0.0, grad, 0
    c0 = int(pv.range.candidates()[0])
    t, raw = _tent_raw(np.where(V, gt.disparities, 0.0))
    k_t = t - c0
    total = 0.0
    ii, jj = np.nonzero(V)
    kt = k_t[ii, jj]
    rw = raw[ii, jj]  # (nv, 3)
    ks = kt[:, None] + np.array([-1, 0, 1])
    in_rng = (ks >= 0) & (ks < m)
    rw = np.where(in_rng, rw, 0.0)
    s = rw.sum(axis=1, keepdims=True)
    ok = s[:, 0] > 0
    ww_ = np.divide(rw, s, out=np.zeros_like(rw), where=s > 0)
    kc = np.clip(ks, 0, m - 1)
    p3 = probs[ii[:, None], jj[:, None], kc]
    p3f = np.maximum(p3, LOG_FLOOR)
    total = float(-(ww_ * np.log(p3f) * ok[:, None]).sum() / n_v)
    g3 = -ww_ / p3f / n_v * ok[:, None] * in_rng
    np.add.at(grad, (ii[:, None], jj[:, None], kc), g3)
    return total, grad, n_v


def loss_ur(reliability: np.ndarray, regions: RegionPartition):
    """-log(1 - r) averaged over the unreliable region.

    Returns (value, gradient w.r.t. the reliability map).
    """
    U = regions.unreliable
    n_u = int(U.sum())
    grad = np.zeros_like(reliability, dtype=np.float64)
    if n_u == 0:
        return 0.0, grad, 0
    one_minus = np.maximum(1.0 - reliability, LOG_FLOOR)
    total = float(-(np.log(one_minus) * U).sum() / n_u)
    grad[U] = 1.0 / one_minus[U] / n_u
    return total, grad, n_u


def loss_trr(init: DisparityField, gt: DisparityField,
             regions: RegionPartition):
    """Mean absolute error over the to-refine region; subgradient 0 at zero
    error. Returns (value, gradient w.r.t. the initial disparity)."""
    T = regions.to_refine & init.valid & gt.valid
    n_t = int(T.sum())
    grad = np.zeros(init.shape, dtype=np.float64)
    if n_t == 0:
        return 0.0, grad, 0
    e = np.where(T, init.disparities - gt.disparities, 0.0)
    total = float(np.abs(e).sum() / n_t)
    grad = np.sign(e) / n_t
    return total, grad, n_t


def smooth_l1(pred: DisparityField, gt: DisparityField):
    """Smooth L1 over pixels valid in both fields.

    Returns (value, gradient w.r.t. pred). An empty overlap yields 0 with a
    warning.
    """
    if pred.shape != gt.shape:
        raise ValueError("pred/gt shapes differ")
    M = pred.valid & gt.valid
    grad = np.zeros(pred.shape, dtype=np.float64)
    n = int(M.sum())
    if n == 0:
        warnings.warn("smooth_l1: no valid overlap between pred and gt")
        return 0.0, grad
    e = np.where(M, pred.disparities - gt.disparities, 0.0)
    a = np.abs(e)
    val = float(np.where(a < 1.0, 0.5 * e * e, a - 0.5).sum() / n)
    grad = np.where(a < 1.0, e, np.sign(e)) / n
    grad[~M] = 0.0
    return val, grad


def evaluate_losses(pv: ProbabilityVolume, est: MapEstimate,
                    gt: DisparityField, regions: RegionPartition) -> LossBreakdown:
    """All three matching-stage losses on already-computed volumes."""
    dvr, _, n_v = loss_dvr(pv, gt, regions)
    ur, _, n_u = loss_ur(est.reliability, regions)
    trr, _, n_t = loss_trr(est.init, gt, regions)
    return LossBreakdown(dvr, ur, trr, n_v, n_u, n_t)


# ---------------------------------------------------------------------------
# Analytic gradient path: losses -> probabilities -> softmax -> correlation
# -> normalization -> (matrix, bias).


def _transform_forward(raw: FeatureMap, t: FeatureTransform):
    u = raw.data @ t.matrix.T + t.bias
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    f = np.where(n > NORM_EPS, u / np.maximum(n, NORM_EPS), 0.0)
    return FeatureMap(f, raw.scale_alpha), u, n


def _normalize_backward(df, f, n):
    """d/du of f = u / ||u||; zero where the norm underflows."""
    inner = (f * df).sum(axis=-1, keepdims=True)
    du = (df - f * inner) / np.maximum(n, NORM_EPS)
    return np.where(n > NORM_EPS, du, 0.0)


def _correlation_backward(dc: np.ndarray, fl: np.ndarray, fr: np.ndarray,
                          cands: np.ndarray):
    h, w, _ = fl.shape
    dfl = np.zeros_like(fl)
    dfr = np.zeros_like(fr)
    for k, d in enumerate(cands):
        d = int(d)
        if d >= w or -d >= w:
            continue
        if d >= 0:
            lj, rj = slice(d, w), slice(0, w - d)
        else:
            lj, rj = slice(0, w + d), slice(-d, w)
        g = dc[:, lj, k, None]
        dfl[:, lj] += g * fr[:, rj]
        dfr[:, rj] += g * fl[:, lj]
    return dfl, dfr


def stage1_loss_and_grads(raw_left: FeatureMap, raw_right: FeatureMap,
                          transform: FeatureTransform, rng: DisparityRange,
                          gt: DisparityField, beta: float = 1.0):
    """Total matching loss and its analytic gradient w.r.t. the transform.

    `gt` must be at the feature-map scale in candidate units (alpha * px).
    `beta` is the correlation gain applied before the softmax (must match the
    inference-time setting). Returns (breakdown, d_matrix, d_bias).
    """
    fl, ul, nl = _transform_forward(raw_left, transform)
    fr, ur_, nr = _transform_forward(raw_right, transform)
    cv = build_cost_volume(fl, fr, rng)
    pv = softmax_over_disparity(cv, beta)
    est = map_disparity(pv, subpixel=True)
    regions = derive_regions(gt, est.init)

    dvr, dp, n_v = loss_dvr(pv, gt, regions)
    urv, dr, n_u = loss_ur(est.reliability, regions)
    trr, dinit, n_t = loss_trr(est.init, gt, regions)

    # route reliability and offset gradients into the 3 taps around the peak
    h, w, m = pv.probs.shape
    khat = np.argmax(pv.probs, axis=-1)
    pm, p0, pp = neighbor_probs(pv, khat)
    S = pm + p0 + pp
    N = pp - pm
    Ssafe = np.maximum(S, LOG_FLOOR)
    do_dpm = (-Ssafe - N) / Ssafe ** 2
    do_dp0 = -N / Ssafe ** 2
    do_dpp = (Ssafe - N) / Ssafe ** 2
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for dk, dr_tap, do_tap in ((-1, dr, do_dpm), (0, dr, do_dp0),
                               (1, dr, do_dpp)):
        kk = khat + dk
        ok = (kk >= 0) & (kk <= m - 1) & (S > 0)
        kc = np.clip(kk, 0, m - 1)
        contrib = np.where(ok, dr_tap + dinit * do_tap, 0.0)
        np.add.at(dp, (ii, jj, kc), contrib)

    # softmax backward (masked candidates stay at zero); the gain scales
    # straight through to the raw correlation scores
    probs = pv.probs
    dc = beta * probs * (dp - (dp * probs).sum(axis=-1, keepdims=True))
    dc[~cv.valid] = 0.0

    dfl, dfr = _correlation_backward(dc, fl.data, fr.data, rng.candidates())
    dul = _normalize_backward(dfl, fl.data, nl)
    dur = _normalize_backward(dfr, fr.data, nr)
    d_matrix = (np.einsum("ijo,ijk->ok", dul, raw_left.data)
                + np.einsum("ijo,ijk->ok", dur, raw_right.data))
    d_bias = dul.sum(axis=(0, 1)) + dur.sum(axis=(0, 1))
    return LossBreakdown(dvr, urv, trr, n_v, n_u, n_t), d_matrix, d_bias


@dataclass
class AdamConfig:
    lr: float = 1e-3
    steps: int = 200
    batch: int = 0  # 0 = all pairs every step
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    """Plain Adam over a list of numpy parameter arrays."""

    def __init__(self, params, cfg: AdamConfig):
        self.params = params
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        c = self.cfg
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * g * g
            mhat = self.m[i] / (1 - c.beta1 ** self.t)
            vhat = self.v[i] / (1 - c.beta2 ** self.t)
            p -= c.lr * mhat / (np.sqrt(vhat) + c.eps)


@dataclass
class TrainingPair:
    """One training example: stereo images plus full-resolution ground truth."""

    left: np.ndarray
    right: np.ndarray
    gt: DisparityField


def prepare_pair(pair: TrainingPair, rng: DisparityRange, window=(3, 3)):
    """Extract raw census features at the range's scale and resample the
    ground truth to candidate units."""
    alpha = rng.scale_alpha
    raw_l = extract_census_gradient(pair.left, window, alpha)
    raw_r = extract_census_gradient(pair.right, window, alpha)
    gt_a = downsample_average(pair.gt, int(1 / alpha))
    return raw_l, raw_r, gt_a


def train_feature_transform(pairs, rng: DisparityRange,
                            cfg: AdamConfig | None = None,
                            window=(3, 3), init: FeatureTransform | None = None,
                            beta: float = 1.0):
    """Fit the linear feature transform by Adam on the three matching losses.

    Returns (transform, history) where history is the per-step total loss.
    Raises RuntimeError if the loss diverges to NaN.
    """
    if not pairs:
        raise ValueError("need at least one training pair")
    cfg = cfg or AdamConfig()
    prepared = [prepare_pair(p, rng, window) for p in pairs]
    n = prepared[0][0].channels
    t = init or FeatureTransform.identity(n)
    t = FeatureTransform(t.matrix.copy(), t.bias.copy())
    opt = Adam([t.matrix, t.bias], cfg)
    picker = np.random.default_rng(cfg.seed)
    history = []
    for step in range(cfg.steps):
        if cfg.batch and cfg.batch < len(prepared):
            idx = picker.choice(len(prepared), size=cfg.batch, replace=False)
            batch = [prepared[i] for i in idx]
        else:
            batch = prepared
        total = 0.0
        gm = np.zeros_like(t.matrix)
        gb = np.zeros_like(t.bias)
        for raw_l, raw_r, gt_a in batch:
            bd, dm, db = stage1_loss_and_grads(raw_l, raw_r, t, rng, gt_a, beta)
            total += bd.total
            gm += dm
            gb += db
        total /= len(batch)
        if not np.isfinite(total):
            raise RuntimeError(f"training diverged at step {step}: loss={total}")
        history.append(total)
        opt.step([gm / len(batch), gb / len(batch)])
    return t, history


def smoothed(history, window: int = 20):
    """Boxcar-smoothed loss history (same length, edge-truncated windows)."""
    h = np.asarray(history, dtype=np.float64)
    if len(h) == 0:
        return h
    out = np.empty_like(h)
    for i in range(len(h)):
        lo = max(0, i - window + 1)
        out[i] = h[lo:i + 1].mean()
    return out
