"""Minimum-norm linear inverse: covariance estimation, operator build/apply,
and the .fwdx on-disk container for forward models and cached operators.

The forward model is consumed pre-clustered; ``cluster_leadfield`` is only
a crude label-averaging stand-in for proper source-space clustering.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import EpochMatrix, ParameterError


class NumericalError(RuntimeError):
    """Linear system could not be solved after regularization."""


@dataclass(frozen=True)
class ForwardModel:
    leadfield: np.ndarray          # [n_sensors, n_sources]
    source_positions: np.ndarray   # [n_sources, 3]
    labels: tuple | None = None    # region id per source

    def __post_init__(self):
        G = np.asarray(self.leadfield, dtype=np.float64)
        object.__setattr__(self, "leadfield", G)
        pos = np.asarray(self.source_positions, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "source_positions", pos)
        if not np.all(np.isfinite(G)):
            raise ParameterError("leadfield contains non-finite values")
        if G.shape[1] < 1:
            raise ParameterError("need at least one source")
        if pos.shape[0] != G.shape[1]:
            raise ParameterError("positions must match source count")

    @property
    def n_sensors(self) -> int:
        return self.leadfield.shape[0]

    @property
    def n_sources(self) -> int:
        return self.leadfield.shape[1]


@dataclass(frozen=True)
class InverseOperator:
    M: np.ndarray                  # [n_sources, n_sensors]
    lam: float
    snr_assumed: float
    source_positions: np.ndarray | None = None


@dataclass(frozen=True)
class NoiseCovariance:
    C: np.ndarray                  # [n_sensors, n_sensors]
    n_samples_used: int

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.float64)
        object.__setattr__(self, "C", C)
        if not np.allclose(C, C.T, atol=1e-10):
            raise ParameterError("covariance must be symmetric")


class CovarianceEstimator:
    """Streaming sample covariance, re-emitted every n_samples_target.

    Row means are removed per emission window so the estimate tracks
    changing noise levels over the session.
    """

    def __init__(self, n_sensors: int, n_samples_target: int):
        if n_samples_target < n_sensors:
            warnings.warn("covariance target below sensor count; estimate "
                          "will be rank-deficient", stacklevel=2)
        self.n_sensors = n_sensors
        self.target = n_samples_target
        self._chunks: list[np.ndarray] = []
        self._count = 0

    def process(self, block: np.ndarray) -> NoiseCovariance | None:
        block = np.atleast_2d(np.asarray(block, dtype=np.float64))
        self._chunks.append(block)
        self._count += block.shape[1]
        if self._count < self.target:
            return None
        data = np.concatenate(self._chunks, axis=1)
        self._chunks = []
        self._count = 0
        data = data - data.mean(axis=1, keepdims=True)
        n = data.shape[1]
        C = (data @ data.T) / max(n - 1, 1)
        return NoiseCovariance(C=C, n_samples_used=n)


def estimate_covariance(blocks, n_samples_target: int) -> NoiseCovariance:
    """One-shot form: consume blocks until the target is reached once."""
    blocks = list(blocks)
    est = CovarianceEstimator(blocks[0].shape[0], n_samples_target)
    result = None
    for b in blocks:
        out = est.process(b)
        if out is not None:
            result = out
    if result is None:
        # fewer samples than the target: estimate from what arrived
        est.target = 0
        result = est.process(np.zeros((blocks[0].shape[0], 0)))
    return result


def build_inverse(fwd: ForwardModel, cov: NoiseCovariance,
                  snr: float) -> InverseOperator:
    """Tikhonov minimum-norm operator M = G^T (G G^T + lam * C')^-1.

    lam = 1 / snr^2; the covariance is trace-scaled to match G G^T so the
    regularization weight is dimensionless.
    """
    if snr <= 0:
        raise ParameterError("snr must be positive")
    G = fwd.leadfield
    lam = 1.0 / snr ** 2
    GGt = G @ G.T
    C = cov.C
    tc = np.trace(C)
    if tc > 0:
        C = C * (np.trace(GGt) / tc)
    A = GGt + lam * C
    try:
        X = np.linalg.solve(A, G)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"singular system, cond(A)={np.linalg.cond(A):.3e}") from None
    resid = np.linalg.norm(A @ X - G)
    if not np.isfinite(resid):
        raise NumericalError("non-finite solve residual")
    return InverseOperator(M=X.T, lam=lam, snr_assumed=float(snr),
                           source_positions=fwd.source_positions)


def apply_inverse(op: InverseOperator, epoch: EpochMatrix) -> EpochMatrix:
    """Project a sensor-space epoch (or raw block) to source space."""
    if epoch.n_channels != op.M.shape[1]:
        raise ParameterError(
            f"operator expects {op.M.shape[1]} sensors, got {epoch.n_channels}")
    return EpochMatrix(data=op.M @ epoch.data, sfreq=epoch.sfreq,
                       t0_offset=epoch.t0_offset,
                       trial_index=epoch.trial_index)


def cluster_leadfield(fwd: ForwardModel) -> ForwardModel:
    """Average leadfield columns per label (crude cluster stand-in)."""
    if fwd.labels is None:
        raise ParameterError("forward model carries no labels")
    labels = np.asarray(fwd.labels)
    uniq = sorted(set(labels.tolist()))
    cols = []
    pos = []
    for lab in uniq:
        mask = labels == lab
        cols.append(fwd.leadfield[:, mask].mean(axis=1))
        pos.append(fwd.source_positions[mask].mean(axis=0))
    return ForwardModel(leadfield=np.stack(cols, axis=1),
                        source_positions=np.stack(pos),
                        labels=tuple(uniq))


# ---------------------------------------------------------------------------
# .fwdx container: u64-LE header length + JSON header + f64-LE row-major data
# ---------------------------------------------------------------------------

def save_fwdx(path, matrix: np.ndarray, positions: np.ndarray,
              labels=None, kind: str = "forward", extra: dict | None = None):
    header = {
        "kind": kind,
        "rows": int(matrix.shape[0]),
        "cols": int(matrix.shape[1]),
        "positions": np.asarray(positions, dtype=float).reshape(-1, 3).tolist(),
        "labels": list(labels) if labels is not None else None,
    }
    if extra:
        header.update(extra)
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def load_fwdx(path):
    """Returns (header dict, matrix)."""
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        data = np.frombuffer(f.read(), dtype="<f8")
    matrix = data.reshape(header["rows"], header["cols"]).copy()
    return header, matrix


def load_forward(path) -> ForwardModel:
    header, matrix = load_fwdx(path)
    if header.get("kind") != "forward":
        raise ParameterError(f"{path} is not a forward model container")
    return ForwardModel(leadfield=matrix,
                        source_positions=np.array(header["positions"]),
                        labels=(tuple(header["labels"])
                                if header.get("labels") else None))


def save_forward(path, fwd: ForwardModel):
    save_fwdx(path, fwd.leadfield, fwd.source_positions, fwd.labels, "forward")


def save_inverse(path, op: InverseOperator):
    pos = (op.source_positions if op.source_positions is not None
           else np.zeros((op.M.shape[0], 3)))
    save_fwdx(path, op.M, pos, None, "inverse",
              extra={"lambda": op.lam, "snr": op.snr_assumed})


def load_inverse(path) -> InverseOperator:
    header, matrix = load_fwdx(path)
    if header.get("kind") != "inverse":
        raise ParameterError(f"{path} is not an inverse operator container")
    return InverseOperator(M=matrix, lam=header["lambda"], snr_assumed=header["snr"],
                           source_positions=np.array(header["positions"]))
