"""Deterministic signed feature-hash text embedding plus a remote-encoder client.

The built-in encoder is a pure function of the text: lowercase, split on
non-alphanumeric runs, take word unigrams and bigrams, hash each n-gram with
64-bit FNV-1a, scatter +/-1 into ``hash % D`` (sign from bit 32 parity), then
L2-normalize.  Identical text gives bit-identical vectors on every platform.
An empty token set maps to the reserved sentinel basis vector e0.
"""

from __future__ import annotations

import functools
import os
import re

import numpy as np

from . import _kernels
from .errors import DimMismatch, RemoteBadDim, RemoteTimeout, RemoteTransport

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
_BIGRAM_SEP = "\x1f"

EMBED_ENDPOINT_ENV = "E2T_EMBED_ENDPOINT"
EMBED_TOKEN_ENV = "E2T_EMBED_TOKEN"
REMOTE_TIMEOUT_S = 10.0


@functools.lru_cache(maxsize=65536)
def _ngram_hash(ngram: str) -> int:
    buf = np.frombuffer(ngram.encode("utf-8"), dtype=np.uint8)
    return _kernels.fnv1a64(buf)


def _ngrams(text: str) -> list[str]:
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    grams = list(tokens)
    for a, b in zip(tokens, tokens[1:]):
        grams.append(a + _BIGRAM_SEP + b)
    return grams


def sentinel_vector(dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.float32)
    v[0] = 1.0
    return v


@functools.lru_cache(maxsize=65536)
def _embed_cached(text: str, dim: int) -> np.ndarray:
    grams = _ngrams(text)
    if not grams:
        v = sentinel_vector(dim)
    else:
        hashes = np.array([_ngram_hash(g) for g in grams], dtype=np.uint64)
        acc = _kernels.hashed_accumulate(hashes, dim)
        norm = float(np.linalg.norm(acc))
        v = (acc / norm).astype(np.float32) if norm != 0.0 else sentinel_vector(dim)
    v.flags.writeable = False  # cached copies are shared between callers
    return v


def embed(text: str, dim: int = 384) -> np.ndarray:
    """Embed text into a unit-norm float32 vector of length ``dim``.

    Pure and cached: repeated texts return the same read-only array.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    return _embed_cached(text, dim)


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against roundoff."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"shapes {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def embed_remote(
    text: str,
    dim: int,
    endpoint: str | None = None,
    token: str | None = None,
    timeout: float = REMOTE_TIMEOUT_S,
) -> np.ndarray:
    """Fetch an embedding from a remote encoder service.

    POSTs {"input": text} to {endpoint}/embed and expects
    {"embedding": [D floats]}.  Raises RemoteTimeout / RemoteTransport /
    RemoteBadDim; callers with fallback enabled drop to the built-in embed.
    """
    import httpx

    endpoint = endpoint or os.environ.get(EMBED_ENDPOINT_ENV)
    if not endpoint:
        raise RemoteTransport("no embedding endpoint configured")
    token = token or os.environ.get(EMBED_TOKEN_ENV)
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    try:
        resp = httpx.post(
            endpoint.rstrip("/") + "/embed",
            json={"input": text},
            headers=headers,
            timeout=timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
    except httpx.TimeoutException as exc:
        raise RemoteTimeout(str(exc)) from exc
    except Exception as exc:
        raise RemoteTransport(str(exc)) from exc
    values = payload.get("embedding")
    if not isinstance(values, list) or len(values) != dim:
        got = len(values) if isinstance(values, list) else "none"
        raise RemoteBadDim(f"expected {dim} floats, got {got}")
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return sentinel_vector(dim)
    return (vec / norm).astype(np.float32)
