"""Dense numerical kernels for small real matrices and root finding.

Matrix exponentials with their running integrals, eigenvalues of small
dense matrices (N <= 8), sign-change root scanning with bisection, and a
2-D Newton solver. Everything is a pure function of its inputs and safe
to call concurrently.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    EvaluationError,
    NonConvergenceError,
    NumericError,
    SingularMatrixError,
)

MAX_EIG_DIM = 8

# Central-difference step used by newton_2d, relative to the iterate.
_FD_REL_STEP = 1e-6


def expm_pair(a: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(e^{A t}, int_0^t e^{A s} ds)`` for a square matrix A.

    The integral comes from the exponential of the augmented block matrix
    ``[[A, I], [0, 0]]``, so it stays exact when A is singular (no A^{-1}
    anywhere).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expm_pair needs a square matrix, got shape {a.shape}")
    if t < 0:
        raise ValueError(f"expm_pair needs t >= 0, got {t}")
    n = a.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = a * t
    aug[:n, n:] = t * np.eye(n)
    big = scipy.linalg.expm(aug)
    exp_at, integral = big[:n, :n].copy(), big[:n, n:].copy()
    if not (np.isfinite(exp_at).all() and np.isfinite(integral).all()):
        raise OverflowError(
            f"matrix exponential overflowed (||A||*t = {np.linalg.norm(a) * t:.3g})"
        )
    return exp_at, integral


def eigenvalues(a: np.ndarray) -> np.ndarray:
    """All eigenvalues (with multiplicity) of a small real matrix.

    Complex eigenvalues of a real matrix come out in conjugate pairs.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"eigenvalues needs a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"eigenvalues supports N <= {MAX_EIG_DIM}, got N = {a.shape[0]}")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc


def bracketed_roots(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    n_grid: int = 2000,
    tol: float = 1e-10,
) -> list[float]:
    """Every root of ``f`` isolated by a sign change on a uniform grid scan.

    Each bracketing interval is refined by bisection until its width is at
    most ``tol``; results are sorted ascending. Tangential roots (no sign
    change) are not found by construction.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if n_grid < 2:
        raise ValueError(f"need n_grid >= 2, got {n_grid}")
    xs = np.linspace(lo, hi, n_grid)
    vals = np.empty(n_grid)
    for k, x in enumerate(xs):
        v = float(f(x))
        if not np.isfinite(v):
            raise EvaluationError(f"f({x!r}) = {v!r} during root scan")
        vals[k] = v
    roots = []
    for k in range(n_grid - 1):
        if vals[k] == 0.0:
            roots.append(float(xs[k]))
        elif vals[k] * vals[k + 1] < 0.0:
            roots.append(bisect_root(f, float(xs[k]), float(xs[k + 1]),
                                     vals[k], vals[k + 1], tol))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    return sorted(roots)


def bisect_root(f, a: float, b: float, fa: float, fb: float, tol: float) -> float:
    """Bisect a sign-changing bracket [a, b] down to width <= tol."""
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise ValueError(f"[{a}, {b}] does not bracket a sign change")
    while (b - a) > tol:
        mid = 0.5 * (a + b)
        fm = float(f(mid))
        if fm == 0.0:
            return mid
        if fa * fm < 0.0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def newton_2d(
    f: Callable[[float, float], Sequence[float]],
    x0: Sequence[float],
    tol: float = 1e-10,
    max_iter: int = 50,
) -> tuple[float, float]:
    """Solve F(x, y) = (0, 0) by Newton iteration.

    The Jacobian is approximated by central finite differences with a
    relative step of 1e-6. Returns the first iterate with
    ``||F||_inf <= tol``; raises NonConvergenceError (carrying the best
    iterate) when the budget runs out.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (2,):
        raise ValueError("x0 must be a pair")
    best = x.copy()
    best_norm = np.inf
    for _ in range(max_iter):
        fx = np.asarray(f(x[0], x[1]), dtype=float)
        norm = float(np.max(np.abs(fx)))
        if norm < best_norm:
            best, best_norm = x.copy(), norm
        if norm <= tol:
            return float(x[0]), float(x[1])
        jac = np.empty((2, 2))
        for j in range(2):
            step = _FD_REL_STEP * max(abs(x[j]), 1e-8)
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            fp = np.asarray(f(xp[0], xp[1]), dtype=float)
            fm = np.asarray(f(xm[0], xm[1]), dtype=float)
            jac[:, j] = (fp - fm) / (2.0 * step)
        try:
            delta = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                f"finite-difference Jacobian singular at {tuple(x)}"
            ) from exc
        if not np.isfinite(delta).all():
            raise SingularMatrixError(
                f"finite-difference Jacobian unusable at {tuple(x)}"
            )
        x = x + delta
    # check the final iterate before giving up
    fx = np.asarray(f(x[0], x[1]), dtype=float)
    norm = float(np.max(np.abs(fx)))
    if norm <= tol:
        return float(x[0]), float(x[1])
    if norm < best_norm:
        best, best_norm = x.copy(), norm
    raise NonConvergenceError(
        f"newton_2d: ||F||_inf = {best_norm:.3g} > tol = {tol:.3g} "
        f"after {max_iter} iterations",
        best=(float(best[0]), float(best[1])),
        best_norm=best_norm,
    )
