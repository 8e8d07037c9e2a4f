"""KYP inequality: feasibility tests, extremal solutions and passivity checks.

For ``Σ = (A, B, C, D)`` the KYP matrix is::

    W(X) = [[-A^T X - X A,  C^T - X B],
            [ C - B^T X,    D + D^T  ]]

and ``Σ`` is passive iff ``W(X) ⪰ 0`` has a positive definite solution.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import numkernels as nk
from .errors import NotFeasible, PhmorError
from .numkernels import KypCertificate
from .systems import ExtendedPhSystem, LtiSystem, PhSystem, ph_to_lti

__all__ = [
    "KypCertificate",
    "kyp_matrix",
    "is_feasible",
    "certify",
    "extremal_solutions",
    "is_passive",
    "regularize_feedthrough",
    "FEEDTHROUGH_EPS",
    "refactor_minimal",
]

#: artificial feedthrough added when ``D + D^T`` is (numerically) singular
FEEDTHROUGH_EPS = 1e-6
_SINGULAR_FEEDTHROUGH = 1e-12


def _lti(sys):
    if isinstance(sys, (PhSystem, ExtendedPhSystem)):
        return ph_to_lti(sys)
    return sys


def kyp_matrix(sys, X):
    """KYP matrix ``W(X)`` of an LTI system (symmetrized)."""
    sys = _lti(sys)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return nk.kyp_matrix(sys.A, sys.B, sys.C, sys.D, X)


def is_feasible(sys, X, tol=1e-8):
    """Test ``X`` for membership in the KYP feasible set.

    ``X`` is feasible if ``λ_min(W(X)) ≥ -tol * max(1, ||W(X)||_2)`` and
    ``X`` is positive definite (its Cholesky factorization exists).

    Returns
    -------
    feasible : bool
    min_eig_W : float
    """
    X = nk.sym(np.atleast_2d(np.asarray(X, dtype=float)))
    W = kyp_matrix(sys, X)
    ev = np.linalg.eigvalsh(W)
    min_eig_W = float(ev[0])
    ok = min_eig_W >= -tol * max(1.0, float(np.max(np.abs(ev))))
    if ok and X.size:
        try:
            np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            ok = False
    return bool(ok), min_eig_W


def certify(sys, X):
    """Build a :class:`KypCertificate` for an arbitrary symmetric ``X``."""
    X = nk.sym(np.atleast_2d(np.asarray(X, dtype=float)))
    W = kyp_matrix(sys, X)
    return KypCertificate(
        X=X,
        min_eig_X=float(np.linalg.eigvalsh(X)[0]) if X.size else 0.0,
        min_eig_W=float(np.linalg.eigvalsh(W)[0]),
    )


def regularize_feedthrough(sys, eps=FEEDTHROUGH_EPS):
    """Add ``eps*I`` to ``D`` if ``D + D^T`` is numerically singular.

    Returns
    -------
    sys : LtiSystem
        The (possibly) modified system.
    shift : float
        ``eps`` if the feedthrough was modified, else ``0.0``.
    """
    sys = _lti(sys)
    if sys.m == 0:
        return sys, 0.0
    lam = np.linalg.eigvalsh(sys.D + sys.D.T)
    if np.min(lam) < _SINGULAR_FEEDTHROUGH:
        return sys.with_feedthrough(sys.D + eps * np.eye(sys.m)), float(eps)
    return sys, 0.0


def _gramian_warning(sys):
    try:
        P = nk.solve_lyapunov(sys.A, sys.B @ sys.B.T)
    except PhmorError:
        return ()
    ev = np.linalg.eigvalsh(P)
    if ev[0] <= sys.n * nk.EPS * max(ev[-1], 0.0):
        return ("controllability Gramian is numerically singular; "
                "the system may not be minimal",)
    return ()


def extremal_solutions(sys, psd_tol=1e-8):
    """Minimal and maximal solutions of the KYP inequality.

    Computed as the stabilizing and anti-stabilizing solutions of the
    passivity Riccati equation.  ``D + D^T`` must be nonsingular; see
    :func:`regularize_feedthrough`.  Minimality is not checked, but a
    warning is attached to the certificates when the controllability
    Gramian is numerically singular.

    Returns
    -------
    (KypCertificate, KypCertificate)
    """
    sys = _lti(sys)
    cmin = nk.solve_are_extremal(sys.A, sys.B, sys.C, sys.D, which="min", psd_tol=psd_tol)
    cmax = nk.solve_are_extremal(sys.A, sys.B, sys.C, sys.D, which="max", psd_tol=psd_tol)
    warn = _gramian_warning(sys) if sys.n and np.max(np.linalg.eigvals(sys.A).real) < 0 else ()
    if warn:
        cmin = replace(cmin, warnings=cmin.warnings + warn)
        cmax = replace(cmax, warnings=cmax.warnings + warn)
    return cmin, cmax


def is_passive(sys, tol=1e-8):
    """Decide passivity of a stable LTI system.

    The system is declared passive iff the stabilizing Riccati solution
    ``X_min`` exists and is positive semidefinite.  A singular ``D + D^T``
    is first regularized with :data:`FEEDTHROUGH_EPS`; the shift is
    recorded in the certificate.

    Returns
    -------
    passive : bool
    certificate : KypCertificate or None
        ``None`` if no Riccati solution could be computed.
    """
    sys = _lti(sys)
    if sys.n and np.max(np.linalg.eigvals(sys.A).real) >= 0:
        return False, None
    reg, shift = regularize_feedthrough(sys)
    try:
        cert = nk.solve_are_extremal(reg.A, reg.B, reg.C, reg.D, which="min",
                                     psd_tol=np.inf)
    except PhmorError:
        return False, None
    cert = replace(cert, feedthrough_shift=shift)
    scale = max(1.0, float(np.max(np.abs(cert.X)))) if cert.X.size else 1.0
    passive = cert.min_eig_X >= -tol * scale
    return bool(passive), cert


def refactor_minimal(sys, tol=1e-10, max_tol=1e-4):
    """pH form of a passive system with the minimal KYP solution as Hamiltonian.

    ``D + D^T`` is regularized first if necessary.  For large systems the
    minimal solution ``X_min`` is often numerically singular; its (near)
    kernel is almost invisible in the output, so the state space is
    restricted to the eigenvectors of ``X_min`` with eigenvalues above
    ``cut * λ_max``.  The minimal solution of the restricted system is then
    recomputed and used as a congruence so that ``Q = I``.  The cut starts at
    ``tol`` and grows by factors of ten (up to ``max_tol``) until the result
    passes :func:`~phmor.systems.validate_ph`.

    Returns
    -------
    ph : ExtendedPhSystem
        With ``Q = I``.
    shift : float
        Feedthrough regularization (0 if none).
    basis : ndarray
        ``n x k`` matrix ``T`` with ``x ≈ T z`` for the new state ``z``.
    """
    from .systems import lti_to_ph, validate_ph

    reg, shift = regularize_feedthrough(_lti(sys))
    X = nk.solve_are_extremal(reg.A, reg.B, reg.C, reg.D, which="min").X
    lam, U = np.linalg.eigh(X)
    cut = tol
    last = None
    while cut <= max_tol * (1 + 1e-12):
        U1 = U[:, lam > cut * lam[-1]]
        k = U1.shape[1]
        restricted = LtiSystem(U1.T @ reg.A @ U1, U1.T @ reg.B, reg.C @ U1, reg.D)
        try:
            Xr = nk.solve_are_extremal(restricted.A, restricted.B, restricted.C,
                                       restricted.D, which="min").X
            L = np.linalg.cholesky(0.5 * (Xr + Xr.T))
            Linv = np.linalg.solve(L.T, np.eye(k))   # z = L^T x_r
            scaled = LtiSystem(L.T @ restricted.A @ Linv, L.T @ restricted.B,
                               restricted.C @ Linv, restricted.D)
            ph = ExtendedPhSystem(lti_to_ph(scaled, np.eye(k)))
            if validate_ph(ph):
                return ph, shift, U1 @ Linv
            last = PhmorError(f"refactored system is not a valid pH system (cut {cut:.0e})")
        except (PhmorError, np.linalg.LinAlgError) as exc:
            last = exc
        cut *= 10.0
    raise NotFeasible(f"no restriction of X_min up to cut {max_tol:g} gives a valid pH form: {last}")
