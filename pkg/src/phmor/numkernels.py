"""Dense matrix-equation and decomposition kernels.

Everything here works on plain :class:`numpy.ndarray` objects so that the
system classes in :mod:`phmor.systems` stay thin.  Symmetric results are
always returned explicitly symmetrized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import (
    FeedthroughSingular,
    IndefiniteSolution,
    NoStableInvariantSubspace,
    SingularPencil,
)

EPS = np.finfo(float).eps

__all__ = [
    "SolveReport",
    "KypCertificate",
    "solve_lyapunov",
    "solve_sylvester",
    "solve_lyapunov_factor",
    "solve_are_extremal",
    "kyp_matrix",
    "sym_eig",
    "controllable_staircase",
    "default_rank_tol",
    "orth",
    "orth_complement",
    "subspace_intersection",
    "sym",
    "skew",
]


@dataclass(frozen=True)
class SolveReport:
    """Diagnostics attached to a matrix-equation solve."""

    residual_rel: float
    condition_estimate: float


@dataclass(frozen=True)
class KypCertificate:
    """A solution ``X`` of the KYP inequality together with diagnostics.

    Attributes
    ----------
    X
        Symmetric ``n x n`` matrix.
    min_eig_X
        Smallest eigenvalue of ``X``.
    min_eig_W
        Smallest eigenvalue of the KYP matrix ``W(X)``.
    are_residual_rel
        Relative residual of the passivity Riccati equation if ``X`` came
        from a Riccati solve, else ``None``.
    feedthrough_shift
        The ``eps`` in ``D + eps*I`` if an artificial feedthrough was added
        before computing ``X`` (0.0 otherwise).
    warnings
        Free-form diagnostic messages.
    """

    X: np.ndarray
    min_eig_X: float
    min_eig_W: float
    are_residual_rel: float | None = None
    feedthrough_shift: float = 0.0
    warnings: tuple = field(default_factory=tuple)

    def is_feasible(self, tol=1e-8):
        scale = max(1.0, abs(self.min_eig_W))
        return self.min_eig_W >= -tol * scale and self.min_eig_X > 0.0


def sym(M):
    return 0.5 * (M + M.T)


def skew(M):
    return 0.5 * (M - M.T)


def default_rank_tol(M):
    """``max(rows, cols) * eps * sigma_max(M)``, the usual numerical-rank cutoff."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return max(M.shape) * EPS * np.linalg.norm(M, 2)


def _check_separation(eA, eF, scale, what):
    if eA.size == 0 or eF.size == 0:
        return
    gap = np.min(np.abs(eA[:, None] + eF[None, :]))
    if gap <= 100 * EPS * max(scale, 1.0):
        raise SingularPencil(
            f"{what} is not uniquely solvable: eigenvalue sum {gap:.3e} is numerically zero"
        )


def _residual_report(res, A, X, F, M):
    denom = (np.linalg.norm(A) * np.linalg.norm(X)
             + np.linalg.norm(X) * np.linalg.norm(F)
             + np.linalg.norm(M))
    rel = np.linalg.norm(res) / denom if denom > 0 else 0.0
    return rel


def solve_sylvester(A, F, M, full_output=False):
    """Solve ``A Y + Y F + M = 0`` with the Bartels-Stewart algorithm.

    Parameters
    ----------
    A : (n, n) array_like
    F : (r, r) array_like
    M : (n, r) array_like
    full_output : bool
        If true, also return a :class:`SolveReport`.

    Raises
    ------
    SingularPencil
        If ``A`` and ``-F`` share an eigenvalue (numerically).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    M = np.asarray(M, dtype=float).reshape(A.shape[0], F.shape[0])
    scale = np.linalg.norm(A, 2) + np.linalg.norm(F, 2)
    _check_separation(np.linalg.eigvals(A), np.linalg.eigvals(F), scale,
                      "Sylvester equation")
    if M.size == 0:
        Y = np.zeros_like(M)
    else:
        Y = spla.solve_sylvester(A, F, -M)
    if not full_output:
        return Y
    res = A @ Y + Y @ F + M
    rel = _residual_report(res, A, Y, F, M)
    return Y, SolveReport(rel, _sep_condition(A, F))


def _sep_condition(A, F):
    gap = np.min(np.abs(np.linalg.eigvals(A)[:, None] + np.linalg.eigvals(F)[None, :]))
    scale = np.linalg.norm(A, 2) + np.linalg.norm(F, 2)
    return float(scale / gap) if gap > 0 else np.inf


def solve_lyapunov(A, M, full_output=False):
    """Solve ``A X + X A^T + M = 0`` for symmetric ``M``.

    Examples
    --------
    >>> solve_lyapunov(-np.eye(2), np.eye(2))
    array([[0.5, 0. ],
           [0. , 0.5]])
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = A.shape[0]
    eA = np.linalg.eigvals(A)
    _check_separation(eA, eA, 2 * np.linalg.norm(A, 2), "Lyapunov equation")
    if n == 0:
        X = np.zeros((0, 0))
    else:
        X = sym(spla.solve_continuous_lyapunov(A, -sym(M)))
    if not full_output:
        return X
    res = A @ X + X @ A.T + M
    rel = _residual_report(res, A, X, A.T, M)
    return X, SolveReport(rel, _sep_condition(A, A.T))


def solve_lyapunov_factor(A, B):
    """Factor ``L`` with ``X = L L^H`` solving ``A X + X A^T + B B^T = 0``.

    Hammarling-type recursion on the complex Schur form of a stable ``A``.
    The factor is complex in general; ``L @ L.conj().T`` is real.  Quadratic
    functionals of ``X`` evaluated through ``L`` (e.g. ``||C L||_F^2``) keep
    full relative accuracy even when they are tiny compared with ``||X||``,
    which the explicitly formed ``X`` cannot deliver.

    Raises
    ------
    SingularPencil
        If ``A`` has an eigenvalue with nonnegative real part.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    T, U = spla.schur(A, output="complex")
    d = np.diag(T)
    if np.max(d.real) >= 0:
        raise SingularPencil("factored Lyapunov solve needs a stable matrix")
    Bt = U.conj().T @ B.astype(complex)
    if Bt.shape[1] > n:
        Bt = np.linalg.qr(Bt.conj().T, mode="r").conj().T
    R = np.zeros((n, n), dtype=complex)
    for k in range(n - 1, -1, -1):
        b2 = Bt[k].conj()
        nb = np.linalg.norm(b2)
        if nb == 0.0:
            Bt = Bt[:k]
            continue
        tau = d[k]
        rho = nb / np.sqrt(-2.0 * tau.real)
        R[k, k] = rho
        if k:
            T11 = T[:k, :k]
            rhs = -(T[:k, k] * rho ** 2 + Bt[:k] @ b2)
            x = spla.solve_triangular(T11 + np.conj(tau) * np.eye(k), rhs)
            r = x / rho
            R[:k, k] = r
            Bt = Bt[:k] - np.outer(r, b2.conj()) / rho
    return U @ R


def kyp_matrix(A, B, C, D, X):
    """Raw KYP matrix ``[[-A^T X - X A, C^T - X B], [C - B^T X, D + D^T]]``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    m = B.shape[1]
    C = np.asarray(C, dtype=float).reshape(m, n)
    D = np.asarray(D, dtype=float).reshape(m, m)
    X = np.asarray(X, dtype=float).reshape(n, n)
    W = np.block([
        [-A.T @ X - X @ A, C.T - X @ B],
        [C - B.T @ X, D + D.T],
    ])
    return sym(W)


def _passivity_are_residual(A, B, C, D, X):
    Rf = D + D.T
    K = X @ B - C.T
    quad = K @ np.linalg.solve(Rf, K.T)
    lin = A.T @ X + X @ A
    res = lin + quad
    denom = 2 * np.linalg.norm(A.T @ X) + np.linalg.norm(quad) + np.linalg.norm(C.T @ np.linalg.solve(Rf, C))
    return float(np.linalg.norm(res) / denom) if denom > 0 else 0.0


def solve_are_extremal(A, B, C, D, which="min", psd_tol=1e-8, axis_tol=1e-10):
    """Extremal solution of the passivity Riccati equation.

    Solves ``A^T X + X A + (X B - C^T)(D + D^T)^{-1}(B^T X - C) = 0`` and
    returns the stabilizing solution (``which="min"``), for which
    ``A - B (D+D^T)^{-1} (C - B^T X)`` is Hurwitz, or the anti-stabilizing
    one (``which="max"``).  The solution is read off an ordered generalized
    Schur form of the extended Hamiltonian pencil, so ``(D + D^T)^{-1}`` is
    never formed.

    Returns
    -------
    KypCertificate

    Raises
    ------
    FeedthroughSingular
    NoStableInvariantSubspace
    IndefiniteSolution
        Only for ``which="min"``, when ``X`` has an eigenvalue below
        ``-psd_tol * max(1, ||X||)``.
    """
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    m = B.shape[1]
    C = np.asarray(C, dtype=float).reshape(m, A.shape[0])
    D = np.asarray(D, dtype=float).reshape(m, m)
    n = A.shape[0]
    Rf = D + D.T
    ev = np.linalg.eigvalsh(sym(Rf)) if m else np.zeros(0)
    if m and np.min(np.abs(ev)) <= 10 * m * EPS * max(np.max(np.abs(ev)), EPS):
        raise FeedthroughSingular("D + D^T is singular")

    # Extended pencil M - s N with
    #   M = [[A, 0, B], [0, -A^T, C^T], [-C, B^T, -(D+D^T)]],  N = diag(I, I, 0).
    # Finite eigenvalues are those of the Hamiltonian matrix; the last m
    # columns are compressed away first (they carry the infinite ones).
    Mx = np.block([
        [A, np.zeros((n, n)), B],
        [np.zeros((n, n)), -A.T, C.T],
        [-C, B.T, -Rf],
    ])
    Nx = np.zeros_like(Mx)
    Nx[:2 * n, :2 * n] = np.eye(2 * n)
    Qc, _ = np.linalg.qr(Mx[:, 2 * n:], mode="complete")
    Qc = Qc[:, m:]
    H = Qc.T @ Mx[:, :2 * n]
    E = Qc.T @ Nx[:, :2 * n]

    scale = max(np.linalg.norm(H, 1), np.linalg.norm(E, 1), 1.0)
    H /= scale
    E /= scale

    _, _, alpha, beta, _, _ = spla.ordqz(H, E, output="real")
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = alpha / beta
    finite = np.isfinite(lam)
    lam_f = lam[finite]
    lam_scale = max(np.max(np.abs(lam_f)), 1.0) if lam_f.size else 1.0
    if lam_f.size != 2 * n or np.any(np.abs(lam_f.real) < axis_tol * lam_scale):
        raise NoStableInvariantSubspace(
            "Hamiltonian pencil has eigenvalues on or near the imaginary axis"
        )

    sort = "lhp" if which == "min" else "rhp"
    _, _, alpha, beta, _, Z = spla.ordqz(H, E, sort=sort, output="real")
    U1 = Z[:n, :n]
    U2 = Z[n:, :n]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spla.LinAlgWarning)
        lu = spla.lu_factor(U1.T, check_finite=False)
    if np.min(np.abs(np.diag(lu[0]))) <= n * EPS * np.linalg.norm(U1, 1):
        raise NoStableInvariantSubspace("invariant subspace basis is not a graph (U1 singular)")
    X = sym(spla.lu_solve(lu, U2.T).T)

    eig_X = np.linalg.eigvalsh(X) if n else np.zeros(1)
    min_eig_X = float(eig_X[0]) if n else 0.0
    if which == "min" and n and min_eig_X < -psd_tol * max(1.0, np.max(np.abs(eig_X))):
        raise IndefiniteSolution(
            f"minimal Riccati solution is indefinite (min eigenvalue {min_eig_X:.3e})"
        )
    W = kyp_matrix(A, B, C, D, X)
    return KypCertificate(
        X=X,
        min_eig_X=min_eig_X,
        min_eig_W=float(np.linalg.eigvalsh(W)[0]),
        are_residual_rel=_passivity_are_residual(A, B, C, D, X),
    )


def sym_eig(S):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    w, V = np.linalg.eigh(sym(S))
    return w, V


def orth(M, tol=None):
    """Orthonormal basis of ``range(M)`` with a numerical-rank cutoff."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if tol is None:
        tol = default_rank_tol(M)
    return U[:, s > tol]


def orth_complement(U, n=None):
    """Orthonormal basis of the orthogonal complement of ``range(U)``.

    ``U`` must already have orthonormal columns.
    """
    n = U.shape[0] if n is None else n
    k = U.shape[1]
    if k == 0:
        return np.eye(n)
    Qf, _ = np.linalg.qr(U, mode="complete")
    return Qf[:, k:]


def subspace_intersection(U1, U2, tol):
    """Orthonormal basis of ``range(U1) ∩ range(U2)``.

    Both inputs need orthonormal columns.  A direction ``U1 c`` counts as
    lying in ``range(U2)`` when the sine of its principal angle with that
    space is at most ``tol``.
    """
    n = U1.shape[0]
    if U1.shape[1] == 0 or U2.shape[1] == 0:
        return np.zeros((n, 0))
    resid = U1 - U2 @ (U2.T @ U1)
    _, s, Vt = np.linalg.svd(resid, full_matrices=True)
    s_full = np.zeros(U1.shape[1])
    s_full[:s.size] = s
    C = Vt.T[:, s_full <= tol]
    if C.shape[1] == 0:
        return np.zeros((n, 0))
    return orth(U1 @ C, tol=0.5)


def controllable_staircase(A, B, tol=None):
    """Orthogonal staircase (controllability) form of ``(A, B)``.

    Parameters
    ----------
    A : (n, n) array_like
    B : (n, m) array_like
    tol : float, optional
        Relative rank tolerance; singular values below
        ``tol * max(||A||_2, ||B||_2)`` are treated as zero.  The default is
        ``max(n, m) * eps``.

    Returns
    -------
    V : (n, n) ndarray
        Orthogonal matrix with ``V^T A V = [[A_c, *], [0, A_cbar]]`` and
        ``V^T B = [B_c; 0]``.
    n_c : int
        Dimension of the controllable subspace; its basis is ``V[:, :n_c]``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    m = B.shape[1]
    if tol is None:
        tol = max(n, m, 1) * EPS
    scale = max(np.linalg.norm(A, 2) if n else 0.0,
                np.linalg.norm(B, 2) if B.size else 0.0)
    V = np.eye(n)
    if n == 0 or scale == 0.0:
        return V, 0
    thresh = tol * scale
    At = A.copy()
    Bk = B.copy()
    offset = 0
    while offset < n:
        U, s, _ = np.linalg.svd(Bk, full_matrices=True)
        rank = int(np.sum(s > thresh))
        if rank == 0:
            break
        V[:, offset:] = V[:, offset:] @ U
        At[:, offset:] = At[:, offset:] @ U
        At[offset:, :] = U.T @ At[offset:, :]
        Bk = At[offset + rank:, offset:offset + rank]
        offset += rank
        if Bk.size == 0:
            break
    return V, offset
