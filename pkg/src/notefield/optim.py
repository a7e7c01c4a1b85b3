"""Minimizers for L1-regularized smooth convex objectives.

Both routines minimize g(x) = f(x) + sum_i lam_i |x_i| given a callable for
the smooth part f and its gradient.  The default is an orthant-wise
quasi-Newton method (L-BFGS directions from smooth-gradient differences,
steered by the pseudo-gradient of g, with orthant projection in the line
search) which lands coordinates exactly at zero.  A monotone proximal
gradient method with backtracking serves as a simpler fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import DivergenceError

SmoothFun = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class OptimResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _as_lam_vector(lam, size: int) -> np.ndarray:
    vec = np.asarray(lam, dtype=float)
    if vec.ndim == 0:
        vec = np.full(size, float(vec))
    if vec.shape != (size,) or (vec < 0).any():
        raise ValueError("lam must be a nonnegative scalar or vector matching x")
    return vec


def _l1(x: np.ndarray, lam: np.ndarray) -> float:
    return float(np.dot(lam, np.abs(x)))


def _pseudo_gradient(x: np.ndarray, grad: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Steepest-descent surrogate for the nondifferentiable objective.

    Off zero it is grad + lam*sign(x); at zero it points into whichever
    orthant decreases g, and vanishes when neither does.
    """
    pg = np.where(x > 0, grad + lam, np.where(x < 0, grad - lam, 0.0))
    at_zero = x == 0
    right = grad + lam
    left = grad - lam
    pg = np.where(at_zero & (right < 0), right, pg)
    pg = np.where(at_zero & (left > 0), left, pg)
    return pg


def _two_loop(v: np.ndarray, mem: list) -> np.ndarray:
    """Implicit product with the inverse Hessian estimate."""
    q = v.copy()
    alphas = []
    for s, y, rho in reversed(mem):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if mem:
        s, y, _ = mem[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(mem, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def owlqn(fun: SmoothFun, x0: np.ndarray, lam, max_iterations: int = 500,
          tolerance: float = 1e-6, memory: int = 10) -> OptimResult:
    x = np.array(x0, dtype=float)
    lam = _as_lam_vector(lam, x.size)
    f, grad = fun(x)
    g = f + _l1(x, lam)
    mem: list = []
    flat_streak = 0
    rise_streak = 0
    iterations = 0
    converged = False

    for iterations in range(1, max_iterations + 1):
        pg = _pseudo_gradient(x, grad, lam)
        if np.abs(pg).max() < 1e-15:
            converged = True
            break
        v = -pg
        d = _two_loop(v, mem)
        d[d * v <= 0] = 0.0  # keep the direction a descent direction for g
        if not d.any():
            converged = True
            break
        step = 1.0 if mem else 1.0 / max(1.0, float(np.linalg.norm(d)))
        xi = np.where(x != 0, np.sign(x), np.sign(d))
        accepted = False
        for _ in range(60):
            x_new = x + step * d
            x_new[np.sign(x_new) != xi] = 0.0  # stay in the chosen orthant
            f_new, grad_new = fun(x_new)
            g_new = f_new + _l1(x_new, lam)
            if g_new <= g + 1e-4 * float(np.dot(pg, x_new - x)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # no acceptable step left at float precision
            break

        if g_new > g:
            rise_streak += 1
            if rise_streak >= 10:
                raise DivergenceError("objective increased on 10 consecutive accepted steps")
        else:
            rise_streak = 0

        s = x_new - x
        y = grad_new - grad
        if np.dot(s, y) > 1e-10:
            mem.append((s, y, 1.0 / np.dot(s, y)))
            if len(mem) > memory:
                mem.pop(0)

        rel = abs(g_new - g) / max(abs(g), 1.0)
        x, f, grad, g = x_new, f_new, grad_new, g_new
        if rel < tolerance:
            flat_streak += 1
            if flat_streak >= 2:
                converged = True
                break
        else:
            flat_streak = 0

    return OptimResult(x=x, objective=g, iterations=iterations, converged=converged)


def _soft_threshold(z: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def proximal_gradient(fun: SmoothFun, x0: np.ndarray, lam, max_iterations: int = 500,
                      tolerance: float = 1e-6) -> OptimResult:
    """Accelerated proximal gradient with backtracking and objective restart.

    Momentum is reset whenever the extrapolated step would raise g, so the
    accepted iterates stay monotone (up to float noise) like the plain
    method, while retaining the fast convergence of the accelerated one.
    """
    x = np.array(x0, dtype=float)
    lam = _as_lam_vector(lam, x.size)
    f, grad = fun(x)
    g = f + _l1(x, lam)
    y, f_y, grad_y = x.copy(), f, grad
    t = 1.0
    t_mom = 1.0
    flat_streak = 0
    rise_streak = 0
    iterations = 0
    converged = False

    def prox_step(point, f_p, grad_p):
        nonlocal t
        for _ in range(60):
            z = _soft_threshold(point - t * grad_p, t * lam)
            dz = z - point
            f_z, grad_z = fun(z)
            if f_z <= f_p + float(np.dot(grad_p, dz)) + float(np.dot(dz, dz)) / (2 * t) + 1e-12:
                return z, f_z, grad_z
            t *= 0.5
        return None

    for iterations in range(1, max_iterations + 1):
        step = prox_step(y, f_y, grad_y)
        if step is not None and step[1] + _l1(step[0], lam) > g and t_mom > 1.0:
            y, f_y, grad_y = x.copy(), f, grad  # momentum overshot: restart
            t_mom = 1.0
            step = prox_step(y, f_y, grad_y)
        if step is None:
            converged = True
            break
        z, f_z, grad_z = step
        g_new = f_z + _l1(z, lam)

        if g_new > g:
            rise_streak += 1
            if rise_streak >= 10:
                raise DivergenceError("objective increased on 10 consecutive accepted steps")
        else:
            rise_streak = 0

        rel = abs(g_new - g) / max(abs(g), 1.0)
        moved = float(np.abs(z - x).max())
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom)) / 2.0
        beta = (t_mom - 1.0) / t_next
        y = z + beta * (z - x)
        x, f, grad, g = z, f_z, grad_z, g_new
        t_mom = t_next
        t *= 1.25  # the backtracking loop will pull it down again if needed
        if rel < tolerance:
            flat_streak += 1
            if flat_streak >= 2 or moved == 0.0:
                converged = True
                break
        else:
            flat_streak = 0
        if beta == 0.0:
            f_y, grad_y = f, grad
        else:
            f_y, grad_y = fun(y)

    return OptimResult(x=x, objective=g, iterations=iterations, converged=converged)
