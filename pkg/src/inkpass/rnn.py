"""Writer-independent Siamese recurrent scorer.

Two branches share one bidirectional LSTM layer over the 21 time functions;
their per-step outputs are length-aligned, concatenated, and read by a second
bidirectional layer whose final states feed a sigmoid head.  Training is
plain numpy: backpropagation through time, adaptive-moment updates, binary
cross-entropy on pair labels (genuine = 1, impostor = 0).
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .capture import Dataset
from .errors import DivergedLoss, ImpossiblePairing, MissingSession, NotNormalized
from .features import FunctionMatrix

LOSS_CLIP = 1e-12


# --- parameters ------------------------------------------------------------

@dataclass(frozen=True)
class NetworkConfig:
    """Layer widths; the defaults match the digit-scoring deployment."""

    input_dim: int = 21
    hidden1: int = 21
    hidden2: int = 42

    def __post_init__(self):
        for name in ("input_dim", "hidden1", "hidden2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def concat_dim(self) -> int:
        # two branches x two directions x hidden1
        return 4 * self.hidden1

    @property
    def summary_dim(self) -> int:
        return 2 * self.hidden2


@dataclass
class LstmWeights:
    """One direction of one layer; gate rows ordered i, f, g, o."""

    W: np.ndarray  # (4H, D) input weights
    U: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)


@dataclass
class NetworkParams:
    config: NetworkConfig
    seed: int
    l1f: LstmWeights
    l1b: LstmWeights
    l2f: LstmWeights
    l2b: LstmWeights
    head_w: np.ndarray
    head_b: np.ndarray  # 0-d array, kept as a tensor for the optimizer

    def tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for tag in ("l1f", "l1b", "l2f", "l2b"):
            cell: LstmWeights = getattr(self, tag)
            out[f"{tag}.W"] = cell.W
            out[f"{tag}.U"] = cell.U
            out[f"{tag}.b"] = cell.b
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    def clone(self) -> "NetworkParams":
        return copy.deepcopy(self)


def _init_cell(rng: np.random.Generator, d: int, h: int) -> LstmWeights:
    sw, su = 1.0 / math.sqrt(d), 1.0 / math.sqrt(h)
    w = rng.uniform(-sw, sw, size=(4 * h, d))
    u = rng.uniform(-su, su, size=(4 * h, h))
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0  # forget gate starts open
    return LstmWeights(W=w, U=u, b=b)


def init_network(seed: int, config: NetworkConfig = NetworkConfig()) -> NetworkParams:
    """Seeded uniform init in +/- 1/sqrt(fan_in); forget biases at +1."""
    rng = np.random.default_rng(seed)
    l1f = _init_cell(rng, config.input_dim, config.hidden1)
    l1b = _init_cell(rng, config.input_dim, config.hidden1)
    l2f = _init_cell(rng, config.concat_dim, config.hidden2)
    l2b = _init_cell(rng, config.concat_dim, config.hidden2)
    sh = 1.0 / math.sqrt(config.summary_dim)
    head_w = rng.uniform(-sh, sh, size=config.summary_dim)
    return NetworkParams(
        config=config, seed=seed,
        l1f=l1f, l1b=l1b, l2f=l2f, l2b=l2b,
        head_w=head_w, head_b=np.array(0.0),
    )


def zero_like_grads(p: NetworkParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in p.tensors().items()}


# --- cells -----------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _lstm_forward(w: LstmWeights, x: np.ndarray):
    """Run one direction over (T, D) input; returns (T, H) states + cache."""
    t_len = x.shape[0]
    h_dim = w.b.size // 4
    hs = np.zeros((t_len, h_dim))
    cache = []
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in range(t_len):
        z = w.W @ x[t] + w.U @ h_prev + w.b
        i = _sigmoid(z[:h_dim])
        f = _sigmoid(z[h_dim:2 * h_dim])
        g = np.tanh(z[2 * h_dim:3 * h_dim])
        o = _sigmoid(z[3 * h_dim:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.append((x[t], h_prev, c_prev, i, f, g, o, c, tc))
        hs[t] = h
        h_prev, c_prev = h, c
    return hs, cache


def _lstm_backward(
    w: LstmWeights,
    cache,
    dh_seq: np.ndarray | None,
    dh_last: np.ndarray | None,
    grads: Mapping[str, np.ndarray],
    prefix: str,
):
    """BPTT for one direction; accumulates into grads, returns input grads."""
    t_len = len(cache)
    h_dim = w.b.size // 4
    d_dim = w.W.shape[1]
    dx = np.zeros((t_len, d_dim))
    dh_next = np.zeros(h_dim)
    dc_next = np.zeros(h_dim)
    for t in range(t_len - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, c, tc = cache[t]
        dh = dh_next.copy()
        if dh_seq is not None:
            dh += dh_seq[t]
        if dh_last is not None and t == t_len - 1:
            dh += dh_last
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di, df, dg = dc * g, dc * c_prev, dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        grads[prefix + ".W"] += np.outer(dz, x_t)
        grads[prefix + ".U"] += np.outer(dz, h_prev)
        grads[prefix + ".b"] += dz
        dx[t] = w.W.T @ dz
        dh_next = w.U.T @ dz
        dc_next = dc * f
    return dx


def _blstm_forward(fw: LstmWeights, bw: LstmWeights, x: np.ndarray):
    """Both directions over (T, D); output (T, 2H), backward half reversed back."""
    hf, cf = _lstm_forward(fw, x)
    hb_rev, cb = _lstm_forward(bw, x[::-1])
    return np.hstack([hf, hb_rev[::-1]]), (cf, cb)


def _blstm_backward(fw, bw, caches, dh, grads, prefix_f, prefix_b):
    h_dim = fw.b.size // 4
    cf, cb = caches
    dx_f = _lstm_backward(fw, cf, dh[:, :h_dim], None, grads, prefix_f)
    dx_b_rev = _lstm_backward(bw, cb, dh[:, h_dim:][::-1], None, grads, prefix_b)
    return dx_f + dx_b_rev[::-1]


def _align_matrix(src_len: int, dst_len: int) -> np.ndarray:
    """Linear-interpolation operator (dst_len, src_len); identity when equal."""
    if src_len == dst_len:
        return np.eye(src_len)
    if src_len == 1:
        return np.ones((dst_len, 1))
    pos = np.linspace(0.0, src_len - 1.0, dst_len)
    lo = np.minimum(np.floor(pos).astype(int), src_len - 2)
    frac = pos - lo
    mat = np.zeros((dst_len, src_len))
    rows = np.arange(dst_len)
    mat[rows, lo] = 1.0 - frac
    mat[rows, lo + 1] = frac
    return mat


# --- the pair network ------------------------------------------------------

def _forward_core(p: NetworkParams, va: np.ndarray, vb: np.ndarray):
    """Logit for the ordered pair (a, b); values arrive as (channels, N)."""
    xa, xb = va.T, vb.T
    h1a, c1a = _blstm_forward(p.l1f, p.l1b, xa)
    h1b, c1b = _blstm_forward(p.l1f, p.l1b, xb)
    t_len = max(xa.shape[0], xb.shape[0])
    aa = _align_matrix(h1a.shape[0], t_len)
    ab = _align_matrix(h1b.shape[0], t_len)
    concat = np.hstack([aa @ h1a, ab @ h1b])
    h2f, c2f = _lstm_forward(p.l2f, concat)
    h2b, c2b = _lstm_forward(p.l2b, concat[::-1])
    summary = np.concatenate([h2f[-1], h2b[-1]])
    z = float(p.head_w @ summary + p.head_b)
    cache = (c1a, c1b, aa, ab, c2f, c2b, summary, concat.shape)
    return z, cache


def _backward_core(p: NetworkParams, cache, dz: float, grads):
    c1a, c1b, aa, ab, c2f, c2b, summary, concat_shape = cache
    h2 = p.config.hidden2
    grads["head.w"] += dz * summary
    grads["head.b"] += dz
    dsummary = dz * p.head_w
    dconcat = np.zeros(concat_shape)
    dconcat += _lstm_backward(p.l2f, c2f, None, dsummary[:h2], grads, "l2f")
    dconcat += _lstm_backward(p.l2b, c2b, None, dsummary[h2:], grads, "l2b")[::-1]
    half = concat_shape[1] // 2
    dh1a = aa.T @ dconcat[:, :half]
    dh1b = ab.T @ dconcat[:, half:]
    _blstm_backward(p.l1f, p.l1b, c1a, dh1a, grads, "l1f", "l1b")
    _blstm_backward(p.l1f, p.l1b, c1b, dh1b, grads, "l1f", "l1b")


def _check_pair(p: NetworkParams, a: FunctionMatrix, b: FunctionMatrix):
    if not (a.normalized and b.normalized):
        raise NotNormalized("pair scoring requires z-normalized matrices")
    want = p.config.input_dim
    if a.values.shape[0] != want or b.values.shape[0] != want:
        raise ValueError(
            f"network expects {want} channels, "
            f"got {a.values.shape[0]} and {b.values.shape[0]}")


def forward_pair(p: NetworkParams, a: FunctionMatrix, b: FunctionMatrix) -> float:
    """Similarity in (0,1); symmetric because both orderings are averaged."""
    _check_pair(p, a, b)
    za, _ = _forward_core(p, a.values, b.values)
    zb, _ = _forward_core(p, b.values, a.values)
    return float((_sigmoid(za) + _sigmoid(zb)) / 2.0)


def pair_scorer(p: NetworkParams):
    """Adapter matching the evaluation layer's pairwise-scorer signature."""
    return lambda a, b: forward_pair(p, a, b)


# --- loss and gradients ----------------------------------------------------

def _pair_loss_forward(p: NetworkParams, a, b):
    za, ca = _forward_core(p, a.values, b.values)
    zb, cb = _forward_core(p, b.values, a.values)
    sa, sb = _sigmoid(za), _sigmoid(zb)
    y_hat = (sa + sb) / 2.0
    return y_hat, (sa, sb, ca, cb)


def _bce(y_hat: float, label: int) -> float:
    clipped = min(max(y_hat, LOSS_CLIP), 1.0 - LOSS_CLIP)
    if label == 1:
        return -math.log(clipped)
    return -math.log(1.0 - clipped)


def _batch_step(p: NetworkParams, batch) -> tuple[list[float], dict]:
    grads = zero_like_grads(p)
    losses = []
    scale = 1.0 / len(batch)
    for a, b, label in batch:
        _check_pair(p, a, b)
        y_hat, (sa, sb, ca, cb) = _pair_loss_forward(p, a, b)
        losses.append(_bce(y_hat, label))
        clipped = min(max(y_hat, LOSS_CLIP), 1.0 - LOSS_CLIP)
        dy = (clipped - label) / (clipped * (1.0 - clipped))
        _backward_core(p, ca, scale * dy * 0.5 * sa * (1.0 - sa), grads)
        _backward_core(p, cb, scale * dy * 0.5 * sb * (1.0 - sb), grads)
    return losses, grads


def batch_loss_and_grads(p: NetworkParams, batch) -> tuple[float, dict]:
    """Mean binary cross-entropy over the batch plus full BPTT gradients."""
    losses, grads = _batch_step(p, batch)
    return math.fsum(losses) / len(losses), grads


def loss_value(p: NetworkParams, pairs) -> float:
    """Forward-only mean loss (used by validation and the gradient oracle)."""
    losses = [_bce(_pair_loss_forward(p, a, b)[0], label) for a, b, label in pairs]
    return math.fsum(losses) / len(losses)


# --- training --------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    holdout: float = 0.1
    patience: int = 10

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size, patience must be positive")
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout fraction must be in [0, 1)")


@dataclass(frozen=True)
class PairSet:
    """Labeled comparison pairs; 1 marks a genuine (same-writer) pair."""

    pairs: tuple[tuple[FunctionMatrix, FunctionMatrix, int], ...]

    def __post_init__(self):
        for _, _, label in self.pairs:
            if label not in (0, 1):
                raise ValueError(f"labels must be 0 or 1, got {label}")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def genuine_count(self) -> int:
        return sum(1 for _, _, y in self.pairs if y == 1)

    @property
    def impostor_count(self) -> int:
        return len(self.pairs) - self.genuine_count


class _Adam:
    def __init__(self, tensors: Mapping[str, np.ndarray], lr: float,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.t = 0

    def step(self, tensors: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]):
        self.t += 1
        for k, w in tensors.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            m_hat = self.m[k] / (1 - self.b1 ** self.t)
            v_hat = self.v[k] / (1 - self.b2 ** self.t)
            w -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(
    p: NetworkParams, data: PairSet, cfg: TrainConfig = TrainConfig()
) -> tuple[NetworkParams, list[float]]:
    """Mini-batch training; returns updated parameters and mean epoch losses.

    A seeded 10% holdout (when enabled) drives early stopping: training ends
    after ``patience`` epochs without validation improvement and the best
    validation parameters are returned.
    """
    if not len(data):
        raise ValueError("cannot train on an empty pair set")
    params = p.clone()
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(data))
    n_val = int(round(cfg.holdout * len(data)))
    val = [data.pairs[i] for i in order[:n_val]]
    pool = [data.pairs[i] for i in order[n_val:]]
    if not pool:
        raise ValueError("holdout left no training pairs")

    opt = _Adam(params.tensors(), cfg.learning_rate)
    curve: list[float] = []
    best_val = math.inf
    best_params = params.clone()
    stale = 0
    for _epoch in range(cfg.epochs):
        perm = rng.permutation(len(pool))
        epoch_losses: list[float] = []
        for start in range(0, len(pool), cfg.batch_size):
            batch = [pool[i] for i in perm[start:start + cfg.batch_size]]
            losses, grads = _batch_step(params, batch)
            if not all(math.isfinite(v) for v in losses):
                raise DivergedLoss("training loss became non-finite")
            epoch_losses.extend(losses)
            opt.step(params.tensors(), grads)
        # fsum is exactly rounded, so the epoch mean does not depend on the
        # shuffle order; with a zero learning rate the curve is bitwise flat.
        curve.append(math.fsum(epoch_losses) / len(pool))
        if val:
            vl = loss_value(params, val)
            if not math.isfinite(vl):
                raise DivergedLoss(f"validation loss became {vl}")
            if vl < best_val:
                best_val = vl
                best_params = params.clone()
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    return (best_params if val else params), curve


# --- pair construction -----------------------------------------------------

def build_pairs(
    ds: Dataset,
    matrices: Mapping[tuple, FunctionMatrix],
    seed: int = 0,
) -> PairSet:
    """Same-digit comparison pairs over every user in ``ds``.

    Genuine: all session-1 x session-2 combinations per (user, digit).
    Impostor: same-digit cross-user pairs, uniformly subsampled (seeded) to
    the genuine count, so the set is balanced.
    """
    users = ds.users
    if len(users) < 2:
        raise ImpossiblePairing("impostor pairs need at least 2 users")
    by_key = ds.by_key()

    def reps(user, digit, session):
        got = sorted(r for (u, d, s, r) in by_key if (u, d, s) == (user, digit, session))
        if not got:
            raise MissingSession(f"{user} digit {digit} has no session-{session} samples")
        return got

    genuine: list[tuple[FunctionMatrix, FunctionMatrix, int]] = []
    digits = sorted({k[1] for k in by_key})
    for user in users:
        for digit in digits:
            for r1 in reps(user, digit, 1):
                for r2 in reps(user, digit, 2):
                    genuine.append((
                        matrices[(user, digit, 1, r1)],
                        matrices[(user, digit, 2, r2)],
                        1,
                    ))

    impostor_keys: list[tuple[tuple, tuple]] = []
    for ua in users:
        for ub in users:
            if ua == ub:
                continue
            for digit in digits:
                for r1 in reps(ua, digit, 1):
                    for r2 in reps(ub, digit, 2):
                        impostor_keys.append(
                            ((ua, digit, 1, r1), (ub, digit, 2, r2)))
    rng = np.random.default_rng(seed)
    take = min(len(genuine), len(impostor_keys))
    picked = rng.choice(len(impostor_keys), size=take, replace=False)
    impostor = [
        (matrices[impostor_keys[i][0]], matrices[impostor_keys[i][1]], 0)
        for i in sorted(picked)
    ]
    return PairSet(pairs=tuple(genuine + impostor))


# --- persistence -----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(p: NetworkParams, path: str) -> None:
    """Single-file tensor dump with the shape-defining configuration."""
    arrays = {k.replace(".", "_"): v for k, v in p.tensors().items()}
    np.savez(
        path,
        format_version=np.array(CHECKPOINT_VERSION),
        input_dim=np.array(p.config.input_dim),
        hidden1=np.array(p.config.hidden1),
        hidden2=np.array(p.config.hidden2),
        seed=np.array(p.seed),
        **arrays,
    )


def load_checkpoint(path: str) -> NetworkParams:
    with np.load(path) as blob:
        version = int(blob["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        config = NetworkConfig(
            input_dim=int(blob["input_dim"]),
            hidden1=int(blob["hidden1"]),
            hidden2=int(blob["hidden2"]),
        )
        fresh = init_network(int(blob["seed"]), config)
        for key, target in fresh.tensors().items():
            stored = blob[key.replace(".", "_")]
            if stored.shape != target.shape:
                raise ValueError(
                    f"checkpoint tensor {key} has shape {stored.shape}, "
                    f"expected {target.shape}")
            target[...] = stored
    return fresh


def save_loss_csv(curve: Sequence[float], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(curve, start=1):
            w.writerow([i, v])
