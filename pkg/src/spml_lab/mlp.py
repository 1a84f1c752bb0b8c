"""Three-layer MLP over pre-extracted features with per-class sigmoid outputs.

Layers are affine D -> H -> H -> C with ReLU in between. The backward pass
is hand-derived; losses supply the gradient with respect to the sigmoid
confidences. Sigmoid outputs are clamped to [CONF_CLAMP, 1 - CONF_CLAMP]
before any log is taken downstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DomainError, ShapeError
from .linalg import RandomSource

CONF_CLAMP = 1e-12

CHECKPOINT_MAGIC = b"SPMW"
CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """Weights and biases; shapes (D,H), (H,), (H,H), (H,), (H,C), (C,)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w1.shape[0], self.w1.shape[1], self.w3.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.as_tuple()])

    def as_tuple(self):
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    @classmethod
    def from_flat(cls, flat: np.ndarray, D: int, H: int, C: int) -> "MlpParams":
        shapes = [(D, H), (H,), (H, H), (H,), (H, C), (C,)]
        total = sum(int(np.prod(s)) for s in shapes)
        if flat.shape != (total,):
            raise ShapeError(f"expected {total} parameters, got {flat.shape}")
        out, i = [], 0
        for s in shapes:
            n = int(np.prod(s))
            out.append(flat[i:i + n].reshape(s).copy())
            i += n
        return cls(*out)

    def copy(self) -> "MlpParams":
        return MlpParams(*(p.copy() for p in self.as_tuple()))


@dataclass
class ForwardCache:
    """Everything the backward pass needs for one batch."""

    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    z3: np.ndarray
    confidences: np.ndarray  # clamped sigmoid outputs, shape (N, C)


def init_params(rng: RandomSource, D: int, H: int, C: int) -> MlpParams:
    """Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases."""
    if D < 1 or H < 1 or C < 1:
        raise DomainError(f"dims must be >= 1, got D={D}, H={H}, C={C}")

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, (fan_in, fan_out))

    return MlpParams(
        w1=glorot(D, H), b1=np.zeros(H),
        w2=glorot(H, H), b2=np.zeros(H),
        w3=glorot(H, C), b3=np.zeros(C),
    )


def forward(params: MlpParams, batch: np.ndarray) -> ForwardCache:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise ShapeError(
            f"batch shape {x.shape} incompatible with input dim "
            f"{params.w1.shape[0]}")
    z1 = x @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2 + params.b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ params.w3 + params.b3
    conf = np.clip(1.0 / (1.0 + np.exp(-z3)), CONF_CLAMP, 1.0 - CONF_CLAMP)
    return ForwardCache(x=x, z1=z1, a1=a1, z2=z2, a2=a2, z3=z3,
                        confidences=conf)


def backward(cache: ForwardCache, params: MlpParams,
             grad_wrt_confidences: np.ndarray) -> MlpParams:
    """Parameter gradients given dLoss/dConfidences; shapes mirror MlpParams."""
    g = np.asarray(grad_wrt_confidences, dtype=np.float64)
    if g.shape != cache.confidences.shape:
        raise ShapeError(
            f"upstream gradient shape {g.shape} != confidences shape "
            f"{cache.confidences.shape}")
    f = cache.confidences
    dz3 = g * f * (1.0 - f)
    dw3 = cache.a2.T @ dz3
    db3 = dz3.sum(axis=0)
    da2 = dz3 @ params.w3.T
    dz2 = da2 * (cache.z2 > 0)
    dw2 = cache.a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ params.w2.T
    dz1 = da1 * (cache.z1 > 0)
    dw1 = cache.x.T @ dz1
    db1 = dz1.sum(axis=0)
    return MlpParams(w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3)


def save_checkpoint(params: MlpParams, path) -> None:
    """Binary checkpoint: magic 'SPMW', u16 version, u16 pad, u32 D/H/C,
    then w1,b1,w2,b2,w3,b3 as little-endian float64 in that order."""
    D, H, C = params.dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HHIII", CHECKPOINT_VERSION, 0, D, H, C))
        fh.write(params.flat().astype("<f8").tobytes())


def load_checkpoint(path) -> MlpParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:4] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a model checkpoint (bad magic)")
    version, _pad, D, H, C = struct.unpack("<HHIII", blob[4:20])
    if version != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    n = D * H + H + H * H + H + H * C + C
    expected = 20 + 8 * n
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f8", offset=20).astype(np.float64)
    return MlpParams.from_flat(flat, D, H, C)
