"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection: set ``E2T_BACKEND=numpy`` to force the fallback, or
``E2T_BACKEND=numba`` to require JIT (raises if numba is unavailable).
Default is numba when importable, numpy otherwise.  Both backends compute
in float64 and agree to floating-point roundoff; replays are deterministic
within a fixed backend.

Kernels:
  fnv1a64(buf)                    -- 64-bit FNV-1a over a uint8 buffer
  hashed_accumulate(hashes, dim)  -- signed feature-hash scatter into a dim vector
  similarity_scan(reps, norms, v) -- cosine similarity of v against each row
  prescreen_scan(reps32, v32)     -- float32 dot products used to prune the
                                     exact float64 scan to a few candidates
  quantize(v32)                   -- int8 quantization of a vector plus an
                                     exact bound on the quantization error
  row_dots(mat, v)                -- sequential-summation row dots; identical
                                     rows always produce identical values
  seq_norm(v)                     -- L2 norm with sequential summation
  classify_scan(...)              -- three-tier cosine argmax against the
                                     representative matrix: int8 scan, then
                                     float32 dots on the surviving band, then
                                     an exact float64 recheck
  elect(...)                      -- cosine argmax of selected member rows
                                     against a centroid, first-wins on ties
  redundant_update(...)           -- fused per-ingest cluster update: row
                                     norm, running sum, centroid, distinct
                                     set, representative election
"""

from __future__ import annotations

import os

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _np_fnv1a64(buf: np.ndarray) -> int:
    h = _FNV_OFFSET
    for b in buf:
        h = ((h ^ int(b)) * _FNV_PRIME) & _MASK64
    return h


def _np_hashed_accumulate(hashes: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(dim, dtype=np.float64)
    buckets = (hashes % np.uint64(dim)).astype(np.int64)
    signs = np.where((hashes >> np.uint64(32)) & np.uint64(1), -1.0, 1.0)
    np.add.at(out, buckets, signs)
    return out


def _np_similarity_scan(reps: np.ndarray, norms: np.ndarray, v: np.ndarray) -> np.ndarray:
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0 or reps.shape[0] == 0:
        return np.zeros(reps.shape[0], dtype=np.float64)
    sims = reps @ v
    sims /= norms * vnorm
    np.clip(sims, -1.0, 1.0, out=sims)
    return sims


def _np_prescreen_scan(reps32: np.ndarray, v32: np.ndarray) -> np.ndarray:
    return reps32 @ v32


def _np_quantize(v32: np.ndarray) -> tuple[np.ndarray, float]:
    v = v32.astype(np.float64)
    q = np.clip(np.rint(v * 127.0), -127.0, 127.0)
    e = v - q / 127.0
    eps = float(np.sqrt(np.sum(e * e))) * (1.0 + 1e-9) + 1e-12
    return q.astype(np.int8), eps


def _np_row_dots(mat: np.ndarray, v: np.ndarray) -> np.ndarray:
    # strictly sequential summation: identical rows must yield identical
    # dots, which BLAS kernels do not guarantee (alignment-dependent paths)
    out = np.empty(mat.shape[0], dtype=np.float64)
    for i in range(mat.shape[0]):
        s = 0.0
        row = mat[i]
        for j in range(row.shape[0]):
            s += float(row[j]) * float(v[j])
        out[i] = s
    return out


def _np_classify_scan(norms, reps32, qreps, v64, v32, qv, band, tau, margin):
    # exact tier widens float32 rows elementwise, identical to a float64 dot
    vnorm = float(np.sqrt(v64 @ v64))
    if vnorm == 0.0:
        return -1
    scores = qreps.astype(np.int32) @ qv.astype(np.int32)
    cand = np.nonzero(scores >= int(scores.max()) - band)[0]
    approx = reps32[cand] @ v32
    amax = float(approx.max())
    if amax < tau - margin:
        return -1
    best = -2.0
    best_i = -1
    for k in np.nonzero(approx >= amax - margin)[0]:
        i = int(cand[k])
        s = _np_row_dots(reps32[i : i + 1], v64)[0] / (norms[i] * vnorm)
        s = min(1.0, max(-1.0, s))
        if s > best:
            best = s
            best_i = i
    if best > tau:
        return best_i
    return -1


def _np_seq_norm(v: np.ndarray) -> float:
    s = 0.0
    for j in range(v.shape[0]):
        s += float(v[j]) * float(v[j])
    return float(np.sqrt(s))


def _np_elect(matrix, norms, rows, c, cnorm):
    sims = _np_row_dots(matrix[rows], c) / (norms[rows] * cnorm)
    return int(rows[int(np.argmax(sims))])


def _np_redundant_update(matrix, norms, drows, nd, sumvec, centroid, r, m):
    row = matrix[r]
    norms[r] = _np_seq_norm(row)
    sumvec += row
    np.divide(sumvec, m, out=centroid)
    is_dup = False
    for k in range(nd):
        if bool(np.all(matrix[drows[k]] == row)):
            is_dup = True
            break
    if not is_dup:
        drows[nd] = r
        nd += 1
    cnorm = float(np.sqrt(centroid @ centroid))
    if cnorm == 0.0:
        return nd, int(drows[0])
    return nd, _np_elect(matrix, norms, drows[:nd], centroid, cnorm)


def _select_backend() -> str:
    requested = os.environ.get("E2T_BACKEND", "").strip().lower()
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise RuntimeError("E2T_BACKEND=numba but numba is not installed")
        return "numpy"
    return "numba"


BACKEND = _select_backend()

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _nb_fnv1a64(buf):
        h = np.uint64(_FNV_OFFSET)
        prime = np.uint64(_FNV_PRIME)
        for i in range(buf.shape[0]):
            h = (h ^ np.uint64(buf[i])) * prime
        return h

    @njit(cache=True)
    def _nb_hashed_accumulate(hashes, dim):
        out = np.zeros(dim, dtype=np.float64)
        d = np.uint64(dim)
        one = np.uint64(1)
        shift = np.uint64(32)
        for i in range(hashes.shape[0]):
            h = hashes[i]
            bucket = np.int64(h % d)
            if (h >> shift) & one:
                out[bucket] -= 1.0
            else:
                out[bucket] += 1.0
        return out

    @njit(cache=True)
    def _nb_similarity_scan(reps, norms, v):
        n = reps.shape[0]
        vnorm = np.sqrt(np.dot(v, v))
        if vnorm == 0.0 or n == 0:
            return np.zeros(n, dtype=np.float64)
        sims = np.dot(reps, v)
        for i in range(n):
            s = sims[i] / (norms[i] * vnorm)
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
            sims[i] = s
        return sims

    @njit(cache=True)
    def _nb_row_dots(mat, v):
        n, d = mat.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            s = 0.0
            for j in range(d):
                s += mat[i, j] * v[j]
            out[i] = s
        return out

    @njit(cache=True, fastmath=True)
    def _nb_prescreen_scan(reps32, v32):
        n, d = reps32.shape
        out = np.empty(n, dtype=np.float32)
        for i in range(n):
            s = np.float32(0.0)
            for j in range(d):
                s += reps32[i, j] * v32[j]
            out[i] = s
        return out

    @njit(cache=True)
    def _nb_quantize(v32):
        d = v32.shape[0]
        q = np.empty(d, dtype=np.int8)
        s = 0.0
        for j in range(d):
            x = np.float64(v32[j])
            r = np.rint(x * 127.0)
            if r > 127.0:
                r = 127.0
            elif r < -127.0:
                r = -127.0
            q[j] = np.int8(r)
            e = x - r / 127.0
            s += e * e
        return q, np.sqrt(s) * (1.0 + 1e-9) + 1e-12

    @njit(cache=True, fastmath=True)
    def _nb_i8_scan(qreps, qv, scores):
        # keeping the row loop free of comparisons lets it vectorize; the
        # caller takes the max in a separate cheap pass
        n, d = qreps.shape
        for i in range(n):
            s = 0
            for j in range(d):
                s += np.int32(qreps[i, j]) * np.int32(qv[j])
            scores[i] = s

    @njit(cache=True, fastmath=True)
    def _nb_dot32(row, v32):
        s = np.float32(0.0)
        for j in range(row.shape[0]):
            s += row[j] * v32[j]
        return s

    @njit(cache=True)
    def _nb_classify_scan(norms, reps32, qreps, v64, v32, qv, band, tau, margin):
        n = reps32.shape[0]
        d = v64.shape[0]
        vn = 0.0
        for j in range(d):
            vn += v64[j] * v64[j]
        vnorm = np.sqrt(vn)
        if vnorm == 0.0:
            return -1
        scores = np.empty(n, dtype=np.int32)
        _nb_i8_scan(qreps, qv, scores)
        smax = scores[0]
        for i in range(1, n):
            if scores[i] > smax:
                smax = scores[i]
        cut_q = smax - band
        cand = np.empty(n, dtype=np.int64)
        approx = np.empty(n, dtype=np.float32)
        nc = 0
        amax = np.float32(-2.0)
        for i in range(n):
            if scores[i] >= cut_q:
                s32 = _nb_dot32(reps32[i], v32)
                cand[nc] = i
                approx[nc] = s32
                nc += 1
                if s32 > amax:
                    amax = s32
        if amax < tau - margin:
            return -1
        cut = amax - margin
        best = -2.0
        best_i = -1
        for k in range(nc):
            if approx[k] >= cut:
                i = cand[k]
                s = 0.0
                for j in range(d):
                    # float32 -> float64 widening is exact, so this equals
                    # the dot against a float64 copy of the row
                    s += np.float64(reps32[i, j]) * v64[j]
                s = s / (norms[i] * vnorm)
                if s > 1.0:
                    s = 1.0
                elif s < -1.0:
                    s = -1.0
                if s > best:
                    best = s
                    best_i = i
        if best > tau:
            return best_i
        return -1

    @njit(cache=True)
    def _nb_seq_norm(v):
        s = 0.0
        for j in range(v.shape[0]):
            x = np.float64(v[j])
            s += x * x
        return np.sqrt(s)

    @njit(cache=True)
    def _nb_elect(matrix, norms, rows, c, cnorm):
        d = c.shape[0]
        best = -2.0
        best_i = rows[0]
        for k in range(rows.shape[0]):
            r = rows[k]
            s = 0.0
            for j in range(d):
                s += np.float64(matrix[r, j]) * c[j]
            s = s / (norms[r] * cnorm)
            if s > best:
                best = s
                best_i = r
        return best_i

    @njit(cache=True)
    def _nb_redundant_update(matrix, norms, drows, nd, sumvec, centroid, r, m):
        d = matrix.shape[1]
        s = 0.0
        for j in range(d):
            x = np.float64(matrix[r, j])
            s += x * x
        norms[r] = np.sqrt(s)
        for j in range(d):
            sumvec[j] += np.float64(matrix[r, j])
            centroid[j] = sumvec[j] / m
        is_dup = False
        for k in range(nd):
            q = drows[k]
            same = True
            for j in range(d):
                if matrix[q, j] != matrix[r, j]:
                    same = False
                    break
            if same:
                is_dup = True
                break
        if not is_dup:
            drows[nd] = r
            nd += 1
        cn = 0.0
        for j in range(d):
            cn += centroid[j] * centroid[j]
        cnorm = np.sqrt(cn)
        if cnorm == 0.0:
            return nd, drows[0]
        best = -2.0
        best_row = drows[0]
        for k in range(nd):
            q = drows[k]
            sdot = 0.0
            for j in range(d):
                sdot += np.float64(matrix[q, j]) * centroid[j]
            sv = sdot / (norms[q] * cnorm)
            if sv > best:
                best = sv
                best_row = q
        return nd, best_row

    def fnv1a64(buf: np.ndarray) -> int:
        return int(_nb_fnv1a64(buf))

    hashed_accumulate = _nb_hashed_accumulate
    similarity_scan = _nb_similarity_scan
    prescreen_scan = _nb_prescreen_scan
    quantize = _nb_quantize
    row_dots = _nb_row_dots
    classify_scan = _nb_classify_scan
    elect = _nb_elect
    redundant_update = _nb_redundant_update

    def seq_norm(v: np.ndarray) -> float:
        return float(_nb_seq_norm(v))
else:
    fnv1a64 = _np_fnv1a64
    hashed_accumulate = _np_hashed_accumulate
    similarity_scan = _np_similarity_scan
    prescreen_scan = _np_prescreen_scan
    quantize = _np_quantize
    row_dots = _np_row_dots
    classify_scan = _np_classify_scan
    elect = _np_elect
    redundant_update = _np_redundant_update
    seq_norm = _np_seq_norm
