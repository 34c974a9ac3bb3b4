"""Feasible-start interior-point (log-barrier Newton) solver.

Minimizes t*psi(x) - sum log(-f_i(x)) over the smooth convex constraints of
a Subproblem, increasing t until the barrier duality bound m/t drops below
the requested gap. The caller must supply a strictly feasible start; line
searches keep every iterate strictly inside the feasible set, so returned
points satisfy all constraints exactly (violation <= 0).
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from threadpoolctl import threadpool_limits

from ..errors import SolverError

_ARMIJO = 0.25
_BACKTRACK = 0.5
_MIN_STEP = 1e-14


def solve_barrier(sp, x0: np.ndarray, gap_target: float, t0: float | None = None,
                  mu: float = 60.0, max_stage_steps: int = 30,
                  max_stages: int = 60, max_total_steps: int = 160):
    """Returns (x, stats) with stats = {'newton_steps', 'stages', 'gap'}.

    BLAS is pinned to one thread: the Newton systems here are far too small
    for threaded kernels, whose spin-waiting dominates the runtime otherwise.
    """
    with threadpool_limits(limits=1, user_api="blas"):
        return _solve_barrier(sp, x0, gap_target, t0, mu, max_stage_steps,
                              max_stages, max_total_steps)


def _solve_barrier(sp, x0, gap_target, t0, mu, max_stage_steps, max_stages,
                   max_total_steps):
    x = np.array(x0, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        psi, f = sp.cheap_eval(x)
    if not np.all(f < 0.0):
        worst = int(np.nanargmax(f))
        raise SolverError(f"infeasible start (constraint {worst}: {f[worst]:.3e})",
                          iterate=x)
    m = sp.num_constraints
    t = float(t0) if t0 else max(1.0, m / max(psi, 1e-2))
    total_steps = 0
    stages = 0
    while True:
        stages += 1
        # only the final stage needs a tightly centered point
        final_stage = t * mu > m / gap_target
        newton_tol = 1e-10 if final_stage else 1e-5
        stalls = 0
        for _ in range(max_stage_steps):
            psi, f, G, g0 = sp.full_eval(x)
            inv_f = 1.0 / (-f)
            g = t * g0 + G.T @ inv_f
            H = t * sp.s.H0 + (G * (inv_f ** 2)[:, None]).T @ G + sp.curvature(x, f)
            dx = _solve_newton(H, g, x)
            lam2 = float(-g @ dx)
            if lam2 / 2.0 <= newton_tol:
                break
            phi0 = t * psi - np.sum(np.log(-f))
            gtd = float(g @ dx)
            alpha = 1.0
            while alpha > _MIN_STEP:
                xn = x + alpha * dx
                with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                    psin, fn = sp.cheap_eval(xn)
                if np.all(fn < 0.0) and np.all(np.isfinite(fn)):
                    phin = t * psin - np.sum(np.log(-fn))
                    if phin <= phi0 + _ARMIJO * alpha * gtd:
                        break
                alpha *= _BACKTRACK
            else:
                break                      # no acceptable step: stage is done
            x = xn
            total_steps += 1
            # at large t the decrement bottoms out at rounding noise while the
            # objective stops moving: that point is as centered as it gets
            if phi0 - phin <= 1e-10 * (1.0 + abs(phin)):
                stalls += 1
                if stalls >= 2:
                    break
            else:
                stalls = 0
        if (m / t <= gap_target or stages >= max_stages
                or total_steps >= max_total_steps):
            break
        t *= mu
    return x, {"newton_steps": total_steps, "stages": stages, "gap": m / t}


def _solve_newton(H, g, x):
    jitter = 0.0
    for attempt in range(6):
        try:
            Hj = H if jitter == 0.0 else H + jitter * np.eye(H.shape[0])
            c = cho_factor(Hj, lower=True, check_finite=False)
            return cho_solve(c, -g, check_finite=False)
        except np.linalg.LinAlgError:
            base = max(np.trace(H) / H.shape[0], 1.0)
            jitter = base * 10.0 ** (-12 + 2 * attempt)
    raise SolverError("Newton system factorization failed", iterate=x)
