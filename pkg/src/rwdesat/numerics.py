"""Dense small-matrix kernels: exponential, rank, eigen, Riccati, Lyapunov.

Everything here operates on matrices of order <= ~40. The matrix
exponential and SVD are delegated to scipy/LAPACK; the Riccati and
Lyapunov solvers are written out because their convergence behaviour
doubles as a stabilizability diagnostic for the controller synthesis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SolverTolerances",
    "RiccatiConvergenceError",
    "SpectralRadiusError",
    "expm",
    "matrix_rank",
    "sym_eig_max",
    "spectral_radius",
    "solve_dare",
    "lqr_gain",
    "closed_loop_matrix",
    "solve_dlyap",
]


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical tolerances shared by the solvers, kept in one place."""

    dare_rel_change: float = 1e-12
    dare_max_iter: int = 200_000
    dare_residual: float = 1e-9
    dlyap_residual: float = 1e-9
    rank_rtol: float = 1e-9
    stability_margin: float = 1e-12


DEFAULT_TOL = SolverTolerances()


class RiccatiConvergenceError(RuntimeError):
    """Riccati iteration failed to converge; usually loss of stabilizability."""


class SpectralRadiusError(ValueError):
    """A matrix required to be Schur stable is not."""


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring with Pade core).

    Raises:
        OverflowError: if the result is not representable in doubles.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    with warnings.catch_warnings():
        # Overflow surfaces as a proper exception below, not as a warning.
        warnings.simplefilter("ignore", RuntimeWarning)
        out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential overflowed double precision")
    return out


def matrix_rank(m: np.ndarray, rtol: float = DEFAULT_TOL.rank_rtol) -> int:
    """Numerical rank: singular values above rtol * sigma_max.

    Columns are scaled to unit max-magnitude first. The controllability
    matrices this is used on mix entries spanning ~1e-7 to 1e4; without
    the balancing, directions carried by small columns drown in the SVD.
    The scale is floored at sqrt(eps) of the matrix magnitude: columns
    below that are roundoff residue (e.g. cos(pi/2) = 6e-17 leaking into
    structurally zero couplings) and amplifying them manufactures rank.
    """
    m = np.asarray(m, dtype=float)
    global_scale = np.max(np.abs(m))
    if global_scale == 0.0 or m.size == 0:
        return 0
    floor = math.sqrt(np.finfo(float).eps) * global_scale
    scale = np.maximum(np.max(np.abs(m), axis=0), floor)
    s = np.linalg.svd(m / scale, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def sym_eig_max(s: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and unit eigenvector of a symmetric matrix.

    The input is symmetrized as (S + S^T)/2 before decomposition.
    """
    s = np.asarray(s, dtype=float)
    s = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(s)
    return float(w[-1]), v[:, -1]


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def solve_dare(
    ad: np.ndarray,
    bd: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    tol: SolverTolerances = DEFAULT_TOL,
) -> np.ndarray:
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Fixed-point iteration from P0 = Q:

        P <- Q + Ad^T P Ad - Ad^T P Bd (R + Bd^T P Bd)^{-1} Bd^T P Ad

    Converges for stabilizable (Ad, Bd) with Q > 0; divergence or stall
    signals loss of stabilizability (e.g. a wheel geometry where the
    linearization is uncontrollable).

    Raises:
        RiccatiConvergenceError: if the residual bound is not met within
            the iteration cap.
    """
    ad = np.asarray(ad, dtype=float)
    bd = np.asarray(bd, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)

    p = q.copy()
    for _ in range(tol.dare_max_iter):
        pb = p @ bd
        gain = np.linalg.solve(r + bd.T @ pb, pb.T @ ad)
        p_next = q + ad.T @ (p @ ad) - (ad.T @ pb) @ gain
        p_next = 0.5 * (p_next + p_next.T)
        delta = np.max(np.abs(p_next - p))
        p = p_next
        if delta <= tol.dare_rel_change * max(1.0, np.max(np.abs(p))):
            break

    residual = _dare_residual(ad, bd, q, r, p)
    bound = tol.dare_residual * np.max(np.abs(p))
    if not np.isfinite(residual) or residual > bound:
        raise RiccatiConvergenceError(
            f"Riccati iteration stalled: residual {residual:.3e} > {bound:.3e}; "
            "the pair (Ad, Bd) is likely not stabilizable"
        )
    return p


def _dare_residual(ad, bd, q, r, p) -> float:
    pb = p @ bd
    gain = np.linalg.solve(r + bd.T @ pb, pb.T @ ad)
    rhs = q + ad.T @ (p @ ad) - (ad.T @ pb) @ gain
    return float(np.max(np.abs(p - rhs)))


def lqr_gain(
    ad: np.ndarray, bd: np.ndarray, p: np.ndarray, r: np.ndarray
) -> np.ndarray:
    """LQR gain K = (R + Bd^T P Bd)^{-1} Bd^T P Ad.

    Sign convention: the stabilizing feedback is u = -K xbar and the
    closed loop is Ad - Bd K (see closed_loop_matrix). Every consumer of
    K in this package applies the minus sign at the point of use.
    """
    pb = np.asarray(p) @ np.asarray(bd)
    return np.linalg.solve(np.asarray(r) + np.asarray(bd).T @ pb, pb.T @ np.asarray(ad))


def closed_loop_matrix(ad: np.ndarray, bd: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Closed-loop matrix Ad - Bd K under u = -K xbar."""
    return np.asarray(ad) - np.asarray(bd) @ np.asarray(k)


def solve_dlyap(
    acl: np.ndarray,
    w: np.ndarray,
    tol: SolverTolerances = DEFAULT_TOL,
) -> np.ndarray:
    """Solve the discrete Lyapunov equation Acl^T P Acl - P + W = 0.

    Solved exactly through the Kronecker-product linear system; with a
    10-state model that is a 100 x 100 solve.

    Raises:
        SpectralRadiusError: if Acl is not Schur stable.
    """
    acl = np.asarray(acl, dtype=float)
    w = np.asarray(w, dtype=float)
    rho = spectral_radius(acl)
    if rho >= 1.0 - tol.stability_margin:
        raise SpectralRadiusError(
            f"discrete Lyapunov equation needs rho(Acl) < 1, got {rho:.12f}"
        )
    n = acl.shape[0]
    at = acl.T
    lhs = np.eye(n * n) - np.kron(at, at)
    p = np.linalg.solve(lhs, w.reshape(-1)).reshape(n, n)
    p = 0.5 * (p + p.T)

    residual = np.max(np.abs(at @ p @ acl - p + w))
    if residual > tol.dlyap_residual * max(1.0, np.max(np.abs(p))):
        raise SpectralRadiusError(
            f"Lyapunov solve residual {residual:.3e} too large (rho = {rho:.6f})"
        )
    return p
