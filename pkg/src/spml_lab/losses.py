"""Eight single-positive multi-label losses: value + analytic gradient.

Every loss maps per-instance per-class sigmoid confidences f in (0,1),
single positive labels y_i and (for the pseudo-label losses) per-instance
pseudo-label sets to a scalar value and the gradient of that value with
respect to every confidence entry. The reduction over a batch is the mean
of per-instance losses.

Kinds:
  an     assume-negative BCE: every unknown class treated as negative
  wan    assume-negative with negatives down-weighted by 1/(C-1)
  ls     label smoothing with smoothing weight epsilon/2 on both terms
  nls    label smoothing applied to assumed negatives only
  focal  focal loss with balance alpha and focusing gamma
  em     positive BCE term plus entropy reward on every unknown class
  mask   assume-negative BCE with pseudo-label classes excluded entirely
  ps     pseudo-labels treated as additional positives
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ShapeError

LOSS_KINDS = ("an", "wan", "ls", "nls", "focal", "em", "mask", "ps")


@dataclass
class LossSpec:
    kind: str = "an"
    epsilon: float = 0.1        # ls / nls smoothing
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    em_alpha: float = 0.1       # entropy reward weight

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}; "
                              f"expected one of {LOSS_KINDS}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in [0,1), got {self.epsilon}")
        if not 0.0 < self.focal_alpha < 1.0:
            raise ConfigError(f"focal_alpha must be in (0,1), got {self.focal_alpha}")
        if self.focal_gamma < 0:
            raise ConfigError(f"focal_gamma must be >= 0, got {self.focal_gamma}")
        if self.em_alpha <= 0:
            raise ConfigError(f"em_alpha must be > 0, got {self.em_alpha}")

    @property
    def needs_pseudo(self) -> bool:
        return self.kind in ("mask", "ps")


def parse_loss_spec(text: str) -> LossSpec:
    """Parse 'kind' or 'kind:key=val,key=val'.

    Keys: epsilon (ls/nls), alpha + gamma (focal), alpha (em).
    """
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    kwargs: dict[str, float] = {}
    if rest:
        for pair in rest.split(","):
            key, _, val = pair.partition("=")
            key = key.strip().lower()
            if not val:
                raise ConfigError(f"bad loss option {pair!r} in {text!r}")
            try:
                fval = float(val)
            except ValueError:
                raise ConfigError(f"non-numeric loss option {pair!r}") from None
            if key == "epsilon":
                kwargs["epsilon"] = fval
            elif key in ("alpha", "focal_alpha") and kind == "focal":
                kwargs["focal_alpha"] = fval
            elif key in ("gamma", "focal_gamma"):
                kwargs["focal_gamma"] = fval
            elif key in ("alpha", "em_alpha") and kind == "em":
                kwargs["em_alpha"] = fval
            else:
                raise ConfigError(f"unknown option {key!r} for loss {kind!r}")
    return LossSpec(kind=kind, **kwargs)


@dataclass
class LossInput:
    """Batch inputs shared by all losses.

    confidences: (N, C) floats in (0,1), already clamped.
    single_labels: (N,) int class indices.
    pseudo_sets: per-instance sets of extra likely-positive classes;
        empty sets when no pseudo-labeling is active.
    """

    confidences: np.ndarray
    single_labels: np.ndarray
    pseudo_sets: list[set[int]] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.confidences = np.asarray(self.confidences, dtype=np.float64)
        self.single_labels = np.asarray(self.single_labels, dtype=np.int64)
        if self.confidences.ndim != 2:
            raise ShapeError("confidences must be 2-D (N, C)")
        n, c = self.confidences.shape
        if self.single_labels.shape != (n,):
            raise ShapeError(
                f"single_labels shape {self.single_labels.shape} != ({n},)")
        if np.any((self.single_labels < 0) | (self.single_labels >= c)):
            raise DomainError(f"single label out of range [0, {c})")
        if np.any((self.confidences <= 0) | (self.confidences >= 1)):
            raise DomainError("confidences must lie strictly inside (0, 1)")
        if self.pseudo_sets is None:
            self.pseudo_sets = [set() for _ in range(n)]
        if len(self.pseudo_sets) != n:
            raise ShapeError(f"{len(self.pseudo_sets)} pseudo sets for {n} instances")
        for i, (y, ps) in enumerate(zip(self.single_labels, self.pseudo_sets)):
            for lab in ps:
                if not 0 <= lab < c:
                    raise DomainError(f"pseudo label {lab} out of range at instance {i}")
            if int(y) in ps:
                raise DomainError(
                    f"instance {i}: own label {y} inside its pseudo set")

    @property
    def shape(self) -> tuple[int, int]:
        return self.confidences.shape

    def positive_mask(self) -> np.ndarray:
        n, c = self.shape
        pos = np.zeros((n, c), dtype=bool)
        pos[np.arange(n), self.single_labels] = True
        return pos

    def pseudo_mask(self) -> np.ndarray:
        n, c = self.shape
        mask = np.zeros((n, c), dtype=bool)
        for i, ps in enumerate(self.pseudo_sets):
            if ps:
                mask[i, sorted(ps)] = True
        return mask


def _reduce(per_instance: np.ndarray, grad: np.ndarray) -> tuple[float, np.ndarray]:
    n = per_instance.shape[0]
    return float(per_instance.mean()), grad / n


def loss_an(inp: LossInput) -> tuple[float, np.ndarray]:
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    terms = np.where(pos, np.log(f), np.log(1.0 - f))
    per_instance = -terms.sum(axis=1) / c
    grad = np.where(pos, -1.0 / f, 1.0 / (1.0 - f)) / c
    return _reduce(per_instance, grad)


def loss_wan(inp: LossInput) -> tuple[float, np.ndarray]:
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    w = 1.0 / (c - 1) if c > 1 else 1.0
    terms = np.where(pos, np.log(f), w * np.log(1.0 - f))
    per_instance = -terms.sum(axis=1) / c
    grad = np.where(pos, -1.0 / f, w / (1.0 - f)) / c
    return _reduce(per_instance, grad)


def loss_ls(inp: LossInput, epsilon: float = 0.1) -> tuple[float, np.ndarray]:
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    a = epsilon / 2.0
    p = np.where(pos, 1.0 - a, a)       # weight on log f
    q = np.where(pos, a, 1.0 - a)       # weight on log(1-f)
    per_instance = -(p * np.log(f) + q * np.log(1.0 - f)).sum(axis=1) / c
    grad = -(p / f - q / (1.0 - f)) / c
    return _reduce(per_instance, grad)


def loss_nls(inp: LossInput, epsilon: float = 0.1) -> tuple[float, np.ndarray]:
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    neg_terms = (1.0 - epsilon) * np.log(1.0 - f) + epsilon * np.log(f)
    terms = np.where(pos, np.log(f), neg_terms)
    per_instance = -terms.sum(axis=1) / c
    neg_grad = (1.0 - epsilon) / (1.0 - f) - epsilon / f
    grad = np.where(pos, -1.0 / f, neg_grad) / c
    return _reduce(per_instance, grad)


def loss_focal(inp: LossInput, alpha: float = 0.25,
               gamma: float = 2.0) -> tuple[float, np.ndarray]:
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    pos_term = alpha * (1.0 - f) ** gamma * np.log(f)
    neg_term = (1.0 - alpha) * f ** gamma * np.log(1.0 - f)
    per_instance = -np.where(pos, pos_term, neg_term).sum(axis=1) / c
    # d/df of the bracketed terms, with the leading -1/C applied after
    if gamma == 0.0:
        dpos = alpha / f
        dneg = -(1.0 - alpha) / (1.0 - f)
    else:
        dpos = alpha * (-gamma * (1.0 - f) ** (gamma - 1.0) * np.log(f)
                        + (1.0 - f) ** gamma / f)
        dneg = (1.0 - alpha) * (gamma * f ** (gamma - 1.0) * np.log(1.0 - f)
                                - f ** gamma / (1.0 - f))
    grad = -np.where(pos, dpos, dneg) / c
    return _reduce(per_instance, grad)


def binary_entropy(f: np.ndarray) -> np.ndarray:
    return -(f * np.log(f) + (1.0 - f) * np.log(1.0 - f))


def loss_em(inp: LossInput, alpha: float = 0.1) -> tuple[float, np.ndarray]:
    """Positive BCE on y_i; each unknown class contributes an entropy
    reward -alpha*H(f)/C, so the value can go (boundedly) negative."""
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    terms = np.where(pos, np.log(f), alpha * binary_entropy(f))
    per_instance = -terms.sum(axis=1) / c
    # dH/df = log((1-f)/f)
    unk_grad = alpha * np.log(f / (1.0 - f))
    grad = np.where(pos, -1.0 / f, unk_grad) / c
    return _reduce(per_instance, grad)


def loss_mask(inp: LossInput) -> tuple[float, np.ndarray]:
    """Assume-negative BCE over the classes outside the pseudo set,
    normalized by C - |pseudo set|. Pseudo classes are frozen: zero loss
    contribution and exactly zero gradient."""
    f = inp.confidences
    n, c = inp.shape
    pos = inp.positive_mask()
    masked = inp.pseudo_mask()
    denom = (c - masked.sum(axis=1)).astype(np.float64)[:, None]
    terms = np.where(pos, np.log(f), np.log(1.0 - f))
    terms = np.where(masked, 0.0, terms)
    per_instance = -(terms / denom).sum(axis=1)
    grad = np.where(pos, -1.0 / f, 1.0 / (1.0 - f)) / denom
    grad[masked] = 0.0
    return _reduce(per_instance, grad)


def loss_ps(inp: LossInput) -> tuple[float, np.ndarray]:
    """Pseudo-labels join y_i as positives; everything else is negative."""
    f = inp.confidences
    n, c = inp.shape
    positive = inp.positive_mask() | inp.pseudo_mask()
    terms = np.where(positive, np.log(f), np.log(1.0 - f))
    per_instance = -terms.sum(axis=1) / c
    grad = np.where(positive, -1.0 / f, 1.0 / (1.0 - f)) / c
    return _reduce(per_instance, grad)


def compute_loss(spec: LossSpec, inp: LossInput) -> tuple[float, np.ndarray]:
    """Dispatch on spec.kind; returns (value, gradient wrt confidences)."""
    kind = spec.kind
    if kind == "an":
        return loss_an(inp)
    if kind == "wan":
        return loss_wan(inp)
    if kind == "ls":
        return loss_ls(inp, spec.epsilon)
    if kind == "nls":
        return loss_nls(inp, spec.epsilon)
    if kind == "focal":
        return loss_focal(inp, spec.focal_alpha, spec.focal_gamma)
    if kind == "em":
        return loss_em(inp, spec.em_alpha)
    if kind == "mask":
        return loss_mask(inp)
    if kind == "ps":
        return loss_ps(inp)
    raise ConfigError(f"unknown loss kind {kind!r}")
