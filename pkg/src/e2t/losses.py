"""Reference implementations of the training objectives, with analytic
gradients for finite-difference verification.  Pure math, no training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySequence,
    LengthMismatch,
    NonFinite,
    NotOneHot,
    NotSimplex,
    ZeroVector,
)

EPS = 1e-7
SIMPLEX_TOL = 1e-6
DEFAULT_TEMPERATURE = 0.07


@dataclass
class EntityBank:
    mu: np.ndarray  # (K_ent, d) entity representation vectors

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.ndim != 2 or self.mu.shape[0] < 1:
            raise ValueError("entity bank needs at least one vector")
        if not np.all(np.isfinite(self.mu)):
            raise NonFinite("entity bank contains non-finite values")


@dataclass
class ActionProjection:
    ffn_h_out: np.ndarray
    ffn_o_out: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        self.ffn_h_out = np.asarray(self.ffn_h_out, dtype=np.float64)
        self.ffn_o_out = np.asarray(self.ffn_o_out, dtype=np.float64)
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def _cosine_row(v: np.ndarray, mu: np.ndarray) -> np.ndarray:
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        raise ZeroVector("zero query vector")
    munorms = np.linalg.norm(mu, axis=1)
    if np.any(munorms == 0.0):
        raise ZeroVector("zero entity vector in bank")
    return (mu @ v) / (munorms * vnorm)


def pointer_select(v: np.ndarray, bank: EntityBank) -> int:
    """Index of the entity most cosine-similar to v; ties take the smallest
    index.  Invariant under positive rescaling of v."""
    sims = _cosine_row(np.asarray(v, dtype=np.float64), bank.mu)
    return int(np.argmax(sims))


def _log_softmax_nll(sims: np.ndarray, temperature: float, target: int) -> float:
    logits = sims / temperature
    m = float(np.max(logits))
    lse = m + np.log(np.sum(np.exp(logits - m)))
    return float(lse - logits[target])


def loc_loss(proj: ActionProjection, bank: EntityBank, c_h: int, c_o: int) -> float:
    """Softmax-contrastive localization loss over entity similarities."""
    k = bank.mu.shape[0]
    if not (0 <= c_h < k and 0 <= c_o < k):
        raise IndexError("entity index out of range")
    sims_h = _cosine_row(proj.ffn_h_out, bank.mu)
    sims_o = _cosine_row(proj.ffn_o_out, bank.mu)
    return _log_softmax_nll(sims_h, proj.temperature, c_h) + _log_softmax_nll(
        sims_o, proj.temperature, c_o
    )


def loc_loss_grad(
    proj: ActionProjection, bank: EntityBank, c_h: int, c_o: int
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of loc_loss w.r.t. ffn_h_out and ffn_o_out."""

    def one_side(v: np.ndarray, target: int) -> np.ndarray:
        sims = _cosine_row(v, bank.mu)
        logits = sims / proj.temperature
        m = np.max(logits)
        e = np.exp(logits - m)
        p = e / e.sum()
        coef = p.copy()
        coef[target] -= 1.0
        coef /= proj.temperature
        vnorm = np.linalg.norm(v)
        vhat = v / vnorm
        munorms = np.linalg.norm(bank.mu, axis=1)
        # d cos(v, mu_j) / dv = (mu_j/|mu_j| - cos * v/|v|) / |v|
        dcos = (bank.mu / munorms[:, None] - sims[:, None] * vhat[None, :]) / vnorm
        return coef @ dcos

    return one_side(proj.ffn_h_out, c_h), one_side(proj.ffn_o_out, c_o)


def act_loss(a: np.ndarray, a_hat: np.ndarray) -> float:
    """Binary cross-entropy summed over action categories."""
    a = np.asarray(a, dtype=np.float64)
    q = np.clip(np.asarray(a_hat, dtype=np.float64), EPS, 1.0 - EPS)
    if a.shape != q.shape:
        raise LengthMismatch(f"shapes {a.shape} vs {q.shape}")
    return float(-np.sum(a * np.log(q) + (1.0 - a) * np.log(1.0 - q)))


def act_loss_grad(a: np.ndarray, a_hat: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    q = np.clip(np.asarray(a_hat, dtype=np.float64), EPS, 1.0 - EPS)
    return -a / q + (1.0 - a) / (1.0 - q)


def place_loss(p: np.ndarray, p_hat: np.ndarray) -> float:
    """Cross-entropy of a one-hot place target against a simplex prediction."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(p_hat, dtype=np.float64)
    if p.shape != q.shape:
        raise LengthMismatch(f"shapes {p.shape} vs {q.shape}")
    if not (np.all((p == 0.0) | (p == 1.0)) and np.sum(p) == 1.0):
        raise NotOneHot("place target must be one-hot")
    if abs(float(np.sum(q)) - 1.0) > SIMPLEX_TOL or np.any(q < 0):
        raise NotSimplex("place prediction must lie on the simplex")
    q = np.clip(q, EPS, None)
    return float(-np.sum(p * np.log(q)))


def place_loss_grad(p: np.ndarray, p_hat: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    q = np.clip(np.asarray(p_hat, dtype=np.float64), EPS, None)
    return -p / q


def visual_loss(pairs: list[tuple[ActionProjection, EntityBank, int, int, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]) -> float:
    """Unweighted sum of (loc + act + place) over matched pairs.

    Each pair is (proj, bank, c_h, c_o, a, a_hat, p, p_hat)."""
    total = 0.0
    for proj, bank, c_h, c_o, a, a_hat, p, p_hat in pairs:
        total += loc_loss(proj, bank, c_h, c_o)
        total += act_loss(a, a_hat)
        total += place_loss(p, p_hat)
    return total


def lm_loss(token_probs) -> float:
    """Autoregressive negative log-likelihood over one token sequence."""
    probs = np.asarray(token_probs, dtype=np.float64)
    if probs.size == 0:
        raise EmptySequence("no token probabilities")
    probs = np.clip(probs, EPS, 1.0)
    return float(-np.sum(np.log(probs)))


def lm_loss_grad(token_probs) -> np.ndarray:
    probs = np.clip(np.asarray(token_probs, dtype=np.float64), EPS, 1.0)
    return -1.0 / probs


def total_loss(l_v: float, l_lm: float) -> float:
    """Combined objective: visual branch plus language branch."""
    if not (np.isfinite(l_v) and np.isfinite(l_lm)):
        raise NonFinite("loss terms must be finite")
    return float(l_v + l_lm)
