"""Structure-preserving Kalman-like decomposition of extended pH systems.

For an extended pH system the unobservable subspace (w.r.t. the Hamiltonian
output) is ``ker Q``, and the reachable subspace ``V_c`` is the Krylov space
of ``((J-R)Q, G-P)``.  The state space splits into four parts

* ``co``   controllable and observable,
* ``c̄o``   uncontrollable but observable,
* ``cō``   controllable, unobservable (``V_c ∩ ker Q``),
* ``c̄ō``   neither (the rest of ``ker Q``),

and for zero initial state the ``co`` block alone reproduces both outputs.
The ``co`` block is returned with Hamiltonian ``1/2 x^T x``.

All rank decisions use one relative tolerance ``tol``:

* eigenvalues of ``Q`` at most ``tol * λ_max(Q)`` count as zero,
* staircase blocks with singular values at most ``tol * ||[A, B]||_2`` are
  rank deficient,
* inside the controllable block, directions whose reachability singular
  values (square roots of controllability Gramian eigenvalues, taken from a
  square-root factor) fall below ``tol`` times the largest are treated as
  numerically uncontrollable,
* two subspaces intersect along directions whose principal-angle sine is at
  most ``sqrt(tol)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import NotPositiveDefinite
from .numkernels import (
    controllable_staircase,
    orth_complement,
    skew,
    solve_lyapunov_factor,
    subspace_intersection,
    sym,
)
from .systems import ExtendedPhSystem, PhSystem

__all__ = [
    "DecompositionReport",
    "DEFAULT_TOL",
    "default_tol",
    "remove_unobservable_hamiltonian",
    "kalman_controllability_form",
    "kalman_full_form",
    "minimal_realization",
]


@dataclass(frozen=True)
class DecompositionReport:
    """Result of :func:`kalman_full_form`.

    Attributes
    ----------
    V
        Transformation ``x = V z`` with ``z = (z_co, z_c̄o, z_cō, z_c̄ō)``.
    dims
        ``(n_co, n_c̄o, n_cō, n_c̄ō)``.
    subsystem
        The ``co`` block as an extended pH system with ``Q = I``.
    tol_used
        Relative tolerance used for all rank decisions.
    transformed
        The whole system in ``z`` coordinates.
    zero_block_residual
        Largest relative norm among the blocks of the transformed system that
        vanish in exact arithmetic.
    """

    V: np.ndarray
    dims: tuple
    subsystem: ExtendedPhSystem
    tol_used: float
    transformed: ExtendedPhSystem
    zero_block_residual: float


#: default relative tolerance for all rank decisions in this module
DEFAULT_TOL = 1e-10


def default_tol(n):
    """Default rank tolerance (independent of ``n``; the argument is kept for callers)."""
    return DEFAULT_TOL


def _ph(sys):
    return sys.ph if isinstance(sys, ExtendedPhSystem) else sys


def _restrict(ph, U, W=None):
    """Galerkin restriction ``z -> U z`` with left basis ``W`` (default ``U``)."""
    W = U if W is None else W
    return PhSystem(
        J=skew(W.T @ ph.J @ W),
        R=sym(W.T @ ph.R @ W),
        Q=sym(U.T @ ph.Q @ U),
        G=W.T @ ph.G,
        P=W.T @ ph.P,
        S=ph.S,
        N=ph.N,
    )


def _observable_basis(Q, tol):
    lam, U = np.linalg.eigh(sym(Q))
    if lam.size == 0 or lam[-1] <= 0:
        return U[:, :0], U
    keep = lam > tol * lam[-1]
    return U[:, keep], U[:, ~keep]


def remove_unobservable_hamiltonian(sys, tol=None):
    """Restrict an extended pH system to ``range(Q)``.

    With ``Q = U Λ U^T`` and ``U_o`` the eigenvectors of the nonzero
    eigenvalues, ``ker Q`` is invariant and invisible in both outputs, so the
    restricted system ``(U_o^T J U_o, U_o^T R U_o, Λ_o, U_o^T G, U_o^T P, S, N)``
    has the same input-to-output behavior.  Returns the input unchanged when
    ``Q`` is already positive definite at ``tol``.
    """
    ph = _ph(sys)
    tol = default_tol(ph.n) if tol is None else tol
    Uo, Uk = _observable_basis(ph.Q, tol)
    if Uk.shape[1] == 0:
        return ExtendedPhSystem(ph)
    return ExtendedPhSystem(_restrict(ph, Uo))


def _hamiltonian_factor(Q):
    """Lower factor ``L`` with ``Q = L L^T``; eigen-factor fallback."""
    n = Q.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    try:
        return np.linalg.cholesky(sym(Q))
    except np.linalg.LinAlgError:
        lam, U = np.linalg.eigh(sym(Q))
        if lam[0] <= 0:
            raise NotPositiveDefinite(
                f"Hamiltonian Hessian is not positive definite (min eigenvalue {lam[0]:.3e})"
            ) from None
        # L L^T = Q with L = U sqrt(Λ) U^T (not triangular, but invertible)
        return (U * np.sqrt(lam)) @ U.T


def _reachability_refine(Ac, Bc, tol):
    """Orthogonal basis of the controllable block sorted by reachability.

    Returns ``(U, r)``: ``U[:, :r]`` spans the numerically reachable part.
    Skipped (``r = n_c``) when ``Ac`` is not asymptotically stable.
    """
    nc = Ac.shape[0]
    if nc == 0 or np.max(np.linalg.eigvals(Ac).real) >= 0:
        return np.eye(nc), nc
    L = solve_lyapunov_factor(Ac, Bc)
    F = np.hstack([L.real, L.imag])
    U, s, _ = np.linalg.svd(F, full_matrices=True)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return U, r


def kalman_controllability_form(sys, tol=None, refine=True):
    """Controllability form of an extended pH system with ``Q`` positive definite.

    With ``Q = L L^T``, the congruence-transformed pair
    ``(L^T (J-R) L, L^T (G-P))`` is brought to staircase form by an orthogonal
    ``Ṽ``; the state transformation is ``V = L^{-T} Ṽ``.  In the new
    coordinates ``Q = I`` and the leading ``n_c`` states span the
    controllable subspace.

    Parameters
    ----------
    sys : ExtendedPhSystem or PhSystem
    tol : float, optional
        Relative rank tolerance, default :data:`DEFAULT_TOL`.
    refine : bool
        Also drop numerically unreachable directions from the controllable
        block (requires that block to be asymptotically stable).

    Returns
    -------
    transformed : ExtendedPhSystem
    V : ndarray
    n_c : int

    Notes
    -----
    Only the lower-left block of ``J - R`` vanishes; the upper-right coupling
    between the controllable and uncontrollable states is generally nonzero.
    It does not influence the leading block when the uncontrollable states
    start at zero.
    """
    ph = _ph(sys)
    n = ph.n
    tol = default_tol(n) if tol is None else tol
    L = _hamiltonian_factor(ph.Q)
    Jt = L.T @ ph.J @ L
    Rt = L.T @ ph.R @ L
    Gt = L.T @ ph.G
    Pt = L.T @ ph.P
    Vt, n_c = controllable_staircase(Jt - Rt, Gt - Pt, tol)
    if refine and n_c:
        Vc = Vt[:, :n_c]
        U, r = _reachability_refine(Vc.T @ (Jt - Rt) @ Vc, Vc.T @ (Gt - Pt), tol)
        if r < n_c:
            Vt = Vt.copy()
            Vt[:, :n_c] = Vc @ U
            n_c = r
    V = np.linalg.solve(L.T, Vt)
    transformed = PhSystem(
        J=skew(Vt.T @ Jt @ Vt),
        R=sym(Vt.T @ Rt @ Vt),
        Q=np.eye(n),
        G=Vt.T @ Gt,
        P=Vt.T @ Pt,
        S=ph.S,
        N=ph.N,
    )
    return ExtendedPhSystem(transformed), V, n_c


def _leading_block(ph, k):
    return PhSystem(
        J=ph.J[:k, :k], R=ph.R[:k, :k], Q=ph.Q[:k, :k],
        G=ph.G[:k], P=ph.P[:k], S=ph.S, N=ph.N,
    )


def minimal_realization(sys, tol=None):
    """Controllable and zero-state observable part of an extended pH system.

    Removes ``ker Q`` and then the (numerically) uncontrollable states.  For
    zero initial state the result has the same output ``y`` and Hamiltonian
    output ``y_H`` as the input system; its Hamiltonian is ``1/2 x^T x``.
    """
    ph = _ph(sys)
    tol = default_tol(ph.n) if tol is None else tol
    obs = remove_unobservable_hamiltonian(ph, tol)
    trans, _, n_c = kalman_controllability_form(obs, tol)
    return ExtendedPhSystem(_leading_block(trans.ph, n_c))


def _rel(block, ref):
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block) / max(ref, np.finfo(float).tiny))


def kalman_full_form(sys, tol=None):
    """Four-block Kalman-like decomposition of an extended pH system.

    Dimensions are ``n_cō = dim(V_c ∩ ker Q)``, ``n_co = dim V_c - n_cō``,
    ``n_c̄o = rank Q - n_co`` and ``n_c̄ō = dim ker Q - n_cō``.

    Returns
    -------
    DecompositionReport
    """
    ph = _ph(sys)
    n = ph.n
    tol = default_tol(n) if tol is None else tol
    A = (ph.J - ph.R) @ ph.Q
    B = ph.G - ph.P

    Uo, Uk = _observable_basis(ph.Q, tol)
    Vst, nc_full = controllable_staircase(A, B, tol)
    Vc = Vst[:, :nc_full]
    V_cq = subspace_intersection(Vc, Uk, np.sqrt(tol))
    V_cbq = Uk @ orth_complement(Uk.T @ V_cq, Uk.shape[1]) if Uk.shape[1] else Uk

    obs = _restrict(ph, Uo)
    trans_o, V_o, n_co = kalman_controllability_form(obs, tol)

    # lift the co directions back into V_c, free of the V_c ∩ ker Q component
    target = V_o[:, :n_co]
    if n_co:
        coef = np.linalg.lstsq(Uo.T @ Vc, target, rcond=None)[0]
        V_co = Vc @ coef
        V_co -= V_cq @ (V_cq.T @ V_co)
        # remove any remaining mismatch in range(Q) (numerically pruned directions)
        V_co += Uo @ (target - Uo.T @ V_co)
    else:
        V_co = np.zeros((n, 0))
    V_cbo = Uo @ V_o[:, n_co:]
    V = np.hstack([V_co, V_cbo, V_cq, V_cbq])
    dims = (n_co, Uo.shape[1] - n_co, V_cq.shape[1], V_cbq.shape[1])

    transformed = ph.transform(V)
    At = np.linalg.solve(V, A @ V)
    Bt = np.linalg.solve(V, B)
    idx_c = np.r_[0:dims[0], dims[0] + dims[1]:dims[0] + dims[1] + dims[2]]
    idx_cb = np.setdiff1d(np.arange(n), idx_c)
    idx_ob = np.arange(dims[0] + dims[1], n)
    normA = max(np.linalg.norm(At), 1e-300)
    normB = max(np.linalg.norm(Bt), 1e-300)
    residual = max(
        _rel(At[np.ix_(idx_cb, idx_c)], normA),
        _rel(At[:, idx_ob], normA),
        _rel(Bt[idx_cb], normB),
        _rel(transformed.Q[:, idx_ob], max(np.linalg.norm(transformed.Q), 1e-300)),
    )

    subsystem = ExtendedPhSystem(_leading_block(trans_o.ph, n_co))
    return DecompositionReport(
        V=V,
        dims=dims,
        subsystem=subsystem,
        tol_used=float(tol),
        transformed=ExtendedPhSystem(transformed),
        zero_block_residual=residual,
    )
