"""Linear and kernel classifiers scored as real-valued functions.

Predicted labels are sign(score) with sign(0) = +1.  Kernel models keep one
coefficient per training sample; the block-kernel machinery only ever
materializes within-block Gram matrices, never the full N x N one.
"""

from __future__ import annotations

import contextlib
import json
from dataclasses import dataclass

import numpy as np

from momclf.data import Dataset, Partition

# Active log of (row_indices, col_indices) pairs for every Gram evaluation,
# used by tests to verify that block algorithms never touch cross-block
# kernel entries.  None means no recording.
_gram_log: list | None = None


@contextlib.contextmanager
def record_gram_calls():
    """Collect the training-index pairs of every Gram evaluation."""
    global _gram_log
    prev = _gram_log
    _gram_log = []
    try:
        yield _gram_log
    finally:
        _gram_log = prev


@dataclass(frozen=True)
class LinearModel:
    """Affine score <u, x> + b on R^p."""

    u: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or not np.all(np.isfinite(u)) or not np.isfinite(self.b):
            raise ValueError("model parameters must be a finite vector and scalar")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def zeros(cls, p: int) -> "LinearModel":
        return cls(u=np.zeros(p), b=0.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family: 'linear' is <x1,x2>, 'rbf' is exp(-gamma ||x1-x2||^2)."""

    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf kernel needs gamma > 0")


def default_gamma(p: int) -> float:
    """Default RBF bandwidth 1/p."""
    return 1.0 / p


def median_heuristic_gamma(X, max_points: int = 500, seed: int = 0) -> float:
    """Bandwidth from the median of pairwise squared distances."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(X.shape[0], max_points, replace=False)
        X = X[idx]
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    med = np.median(sq[np.triu_indices_from(sq, k=1)])
    return 1.0 / max(med, 1e-12)


@dataclass(frozen=True)
class KernelModel:
    """Kernel expansion over training points with block-structured support.

    ``alpha`` has one coefficient per training sample; coefficients of
    indices dropped by the partition stay identically zero.  Out-of-sample
    scores use the sub-model of ``active_block`` (the final median block),
    the one the optimizer returns.
    """

    alpha: np.ndarray
    support: np.ndarray
    kernel: KernelSpec
    partition: Partition
    active_block: int = 0
    full_support: bool = False

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        support = np.asarray(self.support, dtype=float)
        if alpha.shape != (support.shape[0],):
            raise ValueError("alpha must have one coefficient per support point")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "support", support)


def linear_score(m: LinearModel, x):
    """Score <u, x> + b for a single vector or a (n, p) batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.u.shape[0]:
        raise ValueError(f"feature dimension {x.shape[-1]} != model dimension {m.u.shape[0]}")
    return x @ m.u + m.b


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    """Kernel value for one pair of points."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError("kernel arguments must share a dimension")
    if spec.kind == "linear":
        return float(x1 @ x2)
    diff = x1 - x2
    return float(np.exp(-spec.gamma * (diff @ diff)))


def gram(spec: KernelSpec, A, B, idx_rows=None, idx_cols=None) -> np.ndarray:
    """Dense kernel matrix between row sets A and B.

    ``idx_rows``/``idx_cols`` are the training indices the rows and columns
    correspond to; they are only used for call recording.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if _gram_log is not None:
        _gram_log.append((None if idx_rows is None else np.asarray(idx_rows),
                          None if idx_cols is None else np.asarray(idx_cols)))
    if spec.kind == "linear":
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def block_kernel_matrices(ds: Dataset, partition: Partition, spec: KernelSpec):
    """The K within-block Gram matrices N^k = (kappa(X_i, X_j))_{i,j in B_k}.

    Storage is K * (n // K)^2 entries in total; the full Gram matrix is
    never formed.
    """
    X, _ = ds.training_arrays()
    mats = []
    for j in range(partition.k):
        idx = partition.block(j)
        mats.append(gram(spec, X[idx], X[idx], idx_rows=idx, idx_cols=idx))
    return mats


def kernel_score(m: KernelModel, block: int, x_index: int) -> float:
    """Within-block training score: row of N^block times alpha^block."""
    idx = m.partition.block(block)
    pos = np.flatnonzero(idx == x_index)
    if pos.size == 0:
        raise ValueError(f"index {x_index} is not in block {block}")
    row = gram(m.kernel, m.support[x_index : x_index + 1], m.support[idx],
               idx_rows=np.array([x_index]), idx_cols=idx)[0]
    return float(row @ m.alpha[idx])


def kernel_model_score(m: KernelModel, x):
    """Out-of-sample score via the kernel expansion.

    Block-trained models score against the active block's support only;
    full-Gram models score against every support point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if m.full_support:
        scores = gram(m.kernel, x, m.support) @ m.alpha
    else:
        idx = m.partition.block(m.active_block)
        scores = gram(m.kernel, x, m.support[idx]) @ m.alpha[idx]
    return scores if scores.size > 1 else float(scores[0])


def predict(model, x):
    """Predicted labels in {-1,+1} with sign(0) = +1."""
    if isinstance(model, LinearModel):
        s = linear_score(model, x)
    else:
        s = kernel_model_score(model, x)
    return np.where(np.asarray(s) >= 0.0, 1.0, -1.0)


def model_to_json(model) -> str:
    if isinstance(model, LinearModel):
        return json.dumps({"type": "linear", "u": model.u.tolist(), "b": model.b})
    payload = {
        "type": "kernel",
        "alpha": model.alpha.tolist(),
        "kernel": {"kind": model.kernel.kind, "gamma": model.kernel.gamma},
        "blocks": model.partition.blocks.tolist(),
        "support": model.support.tolist(),
        "active_block": model.active_block,
        "full_support": model.full_support,
    }
    return json.dumps(payload)


def model_from_json(text: str):
    obj = json.loads(text)
    if obj["type"] == "linear":
        return LinearModel(u=np.asarray(obj["u"], dtype=float), b=float(obj["b"]))
    if obj["type"] == "kernel":
        support = np.asarray(obj["support"], dtype=float)
        return KernelModel(
            alpha=np.asarray(obj["alpha"], dtype=float),
            support=support,
            kernel=KernelSpec(kind=obj["kernel"]["kind"], gamma=obj["kernel"]["gamma"]),
            partition=Partition(blocks=np.asarray(obj["blocks"], dtype=np.intp),
                                n=support.shape[0]),
            active_block=int(obj["active_block"]),
            full_support=bool(obj.get("full_support", False)),
        )
    raise ValueError(f"unknown model type {obj.get('type')!r}")
