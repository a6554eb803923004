"""Self-check suite for the loss reference math: analytic values and
central finite-difference gradient checks.  Used by the CLI and tests."""

from __future__ import annotations

import math

import numpy as np

from . import losses

FD_STEP = 1e-5
FD_REL_TOL = 1e-4
N_RANDOM_POINTS = 20


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


def _fd_grad(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    g = np.zeros_like(x, dtype=np.float64)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def check_analytic_values() -> list[tuple[str, bool, str]]:
    results = []

    def add(name: str, got: float, want: float, tol: float = 1e-4):
        results.append((name, abs(got - want) <= tol, f"got {got:.6f} want {want:.6f}"))

    bank4 = losses.EntityBank(mu=np.eye(4))
    # equal similarities: query equidistant from all basis vectors
    v = np.ones(4)
    proj = losses.ActionProjection(ffn_h_out=v, ffn_o_out=v, temperature=1.0)
    add("loc_loss uniform (2 ln 4)", losses.loc_loss(proj, bank4, 0, 1), 2 * math.log(4))

    # two entities, correct sim 1 vs other 0, temperature 1
    bank2 = losses.EntityBank(mu=np.eye(2))
    proj2 = losses.ActionProjection(
        ffn_h_out=np.array([1.0, 0.0]),
        ffn_o_out=np.array([0.0, 1.0]),
        temperature=1.0,
    )
    add(
        "loc_loss margin (2 ln(1+1/e))",
        losses.loc_loss(proj2, bank2, 0, 1),
        2 * math.log(1 + math.exp(-1)),
    )

    add(
        "act_loss [1,0] vs [0.9,0.1]",
        losses.act_loss(np.array([1.0, 0.0]), np.array([0.9, 0.1])),
        -2 * math.log(0.9),
    )
    add(
        "place_loss uniform (ln 4)",
        losses.place_loss(np.array([1.0, 0, 0, 0]), np.full(4, 0.25)),
        math.log(4),
    )
    add("lm_loss uniform 1/10 x3 (3 ln 10)", losses.lm_loss([0.1] * 3), 3 * math.log(10))
    add("total_loss 1.5+2.5", losses.total_loss(1.5, 2.5), 4.0, tol=0)
    return results


def check_gradients(seed: int = 0, n_points: int = N_RANDOM_POINTS) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    ok = True
    for _ in range(n_points):
        d, k = 5, 6
        bank = losses.EntityBank(mu=rng.normal(size=(k, d)))
        h = rng.normal(size=d)
        o = rng.normal(size=d)
        temp = float(rng.uniform(0.05, 1.0))
        c_h = int(rng.integers(k))
        c_o = int(rng.integers(k))

        def f_h(x):
            return losses.loc_loss(
                losses.ActionProjection(x, o, temp), bank, c_h, c_o
            )

        def f_o(x):
            return losses.loc_loss(
                losses.ActionProjection(h, x, temp), bank, c_h, c_o
            )

        gh, go = losses.loc_loss_grad(
            losses.ActionProjection(h, o, temp), bank, c_h, c_o
        )
        err = max(_rel_err(gh, _fd_grad(f_h, h)), _rel_err(go, _fd_grad(f_o, o)))
        worst = max(worst, err)
        ok = ok and err <= FD_REL_TOL
    results.append(("loc_loss grad vs finite differences", ok, f"worst rel err {worst:.2e}"))

    worst = 0.0
    ok = True
    for _ in range(n_points):
        g = int(rng.integers(2, 12))
        a = rng.integers(0, 2, size=g).astype(np.float64)
        q = rng.uniform(0.05, 0.95, size=g)
        grad = losses.act_loss_grad(a, q)
        fd = _fd_grad(lambda x: losses.act_loss(a, x), q)
        err = _rel_err(grad, fd)
        worst = max(worst, err)
        ok = ok and err <= FD_REL_TOL
    results.append(("act_loss grad vs finite differences", ok, f"worst rel err {worst:.2e}"))

    worst = 0.0
    ok = True
    for _ in range(n_points):
        p_dim = int(rng.integers(2, 10))
        p = np.zeros(p_dim)
        p[rng.integers(p_dim)] = 1.0
        q = rng.uniform(0.05, 1.0, size=p_dim)
        q /= q.sum()
        grad = losses.place_loss_grad(p, q)
        # finite differences off the simplex: evaluate the clamped log form directly
        fd = _fd_grad(lambda x: float(-np.sum(p * np.log(np.clip(x, losses.EPS, None)))), q)
        err = _rel_err(grad, fd)
        worst = max(worst, err)
        ok = ok and err <= FD_REL_TOL
    results.append(("place_loss grad vs finite differences", ok, f"worst rel err {worst:.2e}"))

    worst = 0.0
    ok = True
    for _ in range(n_points):
        n = int(rng.integers(1, 20))
        probs = rng.uniform(0.05, 1.0, size=n)
        grad = losses.lm_loss_grad(probs)
        fd = _fd_grad(lambda x: losses.lm_loss(x), probs)
        err = _rel_err(grad, fd)
        worst = max(worst, err)
        ok = ok and err <= FD_REL_TOL
    results.append(("lm_loss grad vs finite differences", ok, f"worst rel err {worst:.2e}"))
    return results


def check_properties(seed: int = 1) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []

    # loc_loss monotone decreasing in the correct-entity similarity margin
    bank = losses.EntityBank(mu=np.eye(2))
    vals = []
    for margin in np.linspace(0.1, 2.0, 5):
        v = np.array([1.0, 0.0]) * margin + np.array([0.0, 1.0]) * 0.1
        proj = losses.ActionProjection(v, v, temperature=0.5)
        vals.append(losses.loc_loss(proj, bank, 0, 0))
    mono = all(b < a for a, b in zip(vals, vals[1:]))
    results.append(("loc_loss monotone in margin sweep", mono, f"values {['%.4f' % v for v in vals]}"))

    # pointer_select invariant under positive rescaling
    ok = True
    for _ in range(20):
        bank = losses.EntityBank(mu=rng.normal(size=(8, 4)))
        v = rng.normal(size=4)
        if np.linalg.norm(v) == 0:
            continue
        ok = ok and losses.pointer_select(v, bank) == losses.pointer_select(3.7 * v, bank)
    results.append(("pointer_select scale invariance", ok, ""))
    return results


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    return check_analytic_values() + check_gradients(seed=seed) + check_properties()
