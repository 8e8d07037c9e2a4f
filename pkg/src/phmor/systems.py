"""State-space, port-Hamiltonian and quadratic-output system types.

All types are frozen dataclasses holding read-only float arrays.  Scalars
and nested lists are accepted and reshaped to the documented dimensions.

Conventions for a pH system ``(J, R, Q, G, P, S, N)``::

    x' = (J - R) Q x + (G - P) u
    y  = (G + P)^T Q x + (S - N) u
    y_H = 1/2 x^T Q x
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as spla

from .errors import (
    DimensionMismatch,
    NotFeasible,
    NotPositiveDefinite,
    SingularShift,
    StepFactorizationFailed,
)
from .numkernels import skew, sym

__all__ = [
    "LtiSystem",
    "PhSystem",
    "LtiqoSystem",
    "ExtendedPhSystem",
    "ValidationReport",
    "Trajectory",
    "validate_ph",
    "ph_to_lti",
    "lti_to_ph",
    "evaluate_transfer",
    "simulate",
]


def _mat(x, shape, name):
    a = np.array(x, dtype=float)
    if a.ndim < 2:
        if a.size != shape[0] * shape[1]:
            raise DimensionMismatch(f"{name}: expected shape {shape}, got {a.shape}")
        a = a.reshape(shape)
    if a.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    a.flags.writeable = False
    return a


def _square_dim(x, name):
    a = np.atleast_2d(np.array(x, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {a.shape}")
    return a.shape[0]


def _input_dim(x, n, name):
    a = np.array(x, dtype=float)
    if a.ndim == 2:
        return a.shape[1]
    if n == 0:
        return 0
    if a.size % n:
        raise DimensionMismatch(f"{name} cannot have {n} rows")
    return a.size // n


@dataclass(frozen=True)
class LtiSystem:
    """Standard LTI system ``x' = Ax + Bu, y = Cx + Du``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        n = _square_dim(self.A, "A")
        m = _input_dim(self.B, n, "B")
        Cm = np.array(self.C, dtype=float)
        p = Cm.shape[0] if Cm.ndim == 2 else (Cm.size // n if n else np.atleast_2d(self.D).shape[0])
        object.__setattr__(self, "A", _mat(self.A, (n, n), "A"))
        object.__setattr__(self, "B", _mat(self.B, (n, m), "B"))
        object.__setattr__(self, "C", _mat(self.C, (p, n), "C"))
        object.__setattr__(self, "D", _mat(self.D, (p, m), "D"))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def with_feedthrough(self, D):
        return LtiSystem(self.A, self.B, self.C, D)

    def poles(self):
        return np.linalg.eigvals(self.A)

    def is_stable(self, tol=0.0):
        return self.n == 0 or bool(np.max(self.poles().real) < -tol)


@dataclass(frozen=True)
class PhSystem:
    """Port-Hamiltonian septuple ``(J, R, Q, G, P, S, N)``."""

    J: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    P: np.ndarray
    S: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        n = _square_dim(self.J, "J")
        m = _input_dim(self.G, n, "G")
        for name in ("J", "R", "Q"):
            object.__setattr__(self, name, _mat(getattr(self, name), (n, n), name))
        for name in ("G", "P"):
            object.__setattr__(self, name, _mat(getattr(self, name), (n, m), name))
        for name in ("S", "N"):
            object.__setattr__(self, name, _mat(getattr(self, name), (m, m), name))

    @classmethod
    def from_blocks(cls, J, R, Q, G, P=None, S=None, N=None):
        """Build a pH system, defaulting ``P``, ``S``, ``N`` to zero."""
        n = _square_dim(J, "J")
        m = _input_dim(G, n, "G")
        P = np.zeros((n, m)) if P is None else P
        S = np.zeros((m, m)) if S is None else S
        N = np.zeros((m, m)) if N is None else N
        return cls(J, R, Q, G, P, S, N)

    @property
    def n(self):
        return self.J.shape[0]

    @property
    def m(self):
        return self.G.shape[1]

    @property
    def structure_matrix(self):
        return np.block([[self.J, self.G], [-self.G.T, self.N]])

    @property
    def dissipation_matrix(self):
        return np.block([[self.R, self.P], [self.P.T, self.S]])

    def hamiltonian(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * x @ self.Q @ x

    def transform(self, T):
        """State-space transformation ``x = T z``; returns the pH system in ``z``."""
        T = np.asarray(T, dtype=float)
        lu = spla.lu_factor(T)
        Tinv_J = spla.lu_solve(lu, self.J)
        Tinv_R = spla.lu_solve(lu, self.R)
        return PhSystem(
            J=skew(spla.lu_solve(lu, Tinv_J.T).T),
            R=sym(spla.lu_solve(lu, Tinv_R.T).T),
            Q=sym(T.T @ self.Q @ T),
            G=spla.lu_solve(lu, self.G),
            P=spla.lu_solve(lu, self.P),
            S=self.S,
            N=self.N,
        )


@dataclass(frozen=True)
class LtiqoSystem:
    """Linear dynamics with the single quadratic output ``1/2 x^T Qout x``."""

    A: np.ndarray
    B: np.ndarray
    Qout: np.ndarray

    def __post_init__(self):
        n = _square_dim(self.A, "A")
        m = _input_dim(self.B, n, "B")
        object.__setattr__(self, "A", _mat(self.A, (n, n), "A"))
        object.__setattr__(self, "B", _mat(self.B, (n, m), "B"))
        Qo = _mat(self.Qout, (n, n), "Qout")
        if n and np.max(np.abs(Qo - Qo.T)) > 1e-12 * max(1.0, np.max(np.abs(Qo))):
            raise ValueError("Qout must be symmetric")
        object.__setattr__(self, "Qout", Qo)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class ExtendedPhSystem:
    """pH system carrying both the linear output and the Hamiltonian output."""

    ph: PhSystem

    @property
    def n(self):
        return self.ph.n

    @property
    def m(self):
        return self.ph.m

    @property
    def io(self):
        return ph_to_lti(self.ph)

    @property
    def ham(self):
        ph = self.ph
        return LtiqoSystem((ph.J - ph.R) @ ph.Q, ph.G - ph.P, ph.Q)


@dataclass
class ValidationReport:
    """Violated pH conditions as ``(message, magnitude)`` pairs."""

    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid port-Hamiltonian system"
        return "\n".join(f"{msg} (magnitude {mag:.3e})" for msg, mag in self.violations)


def validate_ph(sys, tol=1e-8):
    """Check the three defining pH conditions within a relative tolerance.

    The absolute threshold for each check is ``tol * max(1, ||M||_F)`` where
    ``M`` is the matrix being checked.
    """
    if isinstance(sys, ExtendedPhSystem):
        sys = sys.ph
    report = ValidationReport()

    def thresh(M):
        return tol * max(1.0, np.linalg.norm(M))

    Gam = sys.structure_matrix
    err = np.linalg.norm(Gam + Gam.T)
    if err > thresh(Gam):
        report.violations.append(("structure matrix not skew-symmetric", err))

    for label, M in (("dissipation matrix", sys.dissipation_matrix),
                     ("Hamiltonian Hessian", sys.Q)):
        asym = np.linalg.norm(M - M.T)
        if asym > thresh(M):
            report.violations.append((f"{label} not symmetric", asym))
        if M.size:
            lam = np.linalg.eigvalsh(sym(M))[0]
            if lam < -thresh(M):
                report.violations.append((f"{label} not positive semidefinite", -lam))
    return report


def ph_to_lti(sys):
    """``A=(J-R)Q, B=G-P, C=(G+P)^T Q, D=S-N``."""
    if isinstance(sys, ExtendedPhSystem):
        sys = sys.ph
    return LtiSystem(
        (sys.J - sys.R) @ sys.Q,
        sys.G - sys.P,
        (sys.G + sys.P).T @ sys.Q,
        sys.S - sys.N,
    )


def lti_to_ph(sys, X, tol=1e-8):
    """pH factorization of a passive LTI system from a KYP solution ``X``.

    Uses ``Q = X``, ``J = Skew(A X^-1)``, ``R = -Sym(A X^-1)``,
    ``G = (X^-1 C^T + B)/2``, ``P = (X^-1 C^T - B)/2``, ``S = Sym(D)``,
    ``N = Skew(D)``.

    Raises
    ------
    NotPositiveDefinite
        If the Cholesky factorization of ``X`` fails.
    NotFeasible
        If ``X`` violates the KYP inequality by more than ``tol``
        (relative to ``||W(X)||``).
    """
    from .kyp import is_feasible

    X = sym(np.atleast_2d(np.asarray(X, dtype=float)))
    if X.shape != (sys.n, sys.n):
        raise DimensionMismatch(f"X must be {sys.n}x{sys.n}")
    try:
        cho = spla.cho_factor(X, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("X is not positive definite") from exc
    ok, min_eig_W = is_feasible(sys, X, tol=tol)
    if not ok:
        raise NotFeasible(f"X violates the KYP inequality (min eigenvalue {min_eig_W:.3e})")
    AXinv = spla.cho_solve(cho, sys.A.T).T
    XinvCt = spla.cho_solve(cho, sys.C.T)
    return PhSystem(
        J=skew(AXinv),
        R=-sym(AXinv),
        Q=X,
        G=0.5 * (XinvCt + sys.B),
        P=0.5 * (XinvCt - sys.B),
        S=sym(sys.D),
        N=skew(sys.D),
    )


def evaluate_transfer(sys, s):
    """``H(s) = C (sI - A)^{-1} B + D``."""
    if isinstance(sys, (PhSystem, ExtendedPhSystem)):
        sys = ph_to_lti(sys)
    n = sys.n
    M = s * np.eye(n) - sys.A
    try:
        with warnings.catch_warnings():
            # exact singularity is reported below as SingularShift
            warnings.simplefilter("ignore", spla.LinAlgWarning)
            lu = spla.lu_factor(M, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularShift(f"sI - A is singular at s={s}") from exc
    if n and np.min(np.abs(np.diag(lu[0]))) <= n * np.finfo(float).eps * max(np.linalg.norm(M, 1), 1.0):
        raise SingularShift(f"sI - A is singular at s={s}")
    return sys.C @ spla.lu_solve(lu, sys.B.astype(complex)) + sys.D


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    y_H: np.ndarray


def simulate(sys, u, x0=None, dt=1e-2, t_final=None):
    """Implicit-midpoint simulation of an extended pH system.

    Parameters
    ----------
    sys : ExtendedPhSystem
    u : callable or array_like
        Either ``u(t) -> (m,)`` or samples of shape ``(N+1, m)`` on the grid
        ``t_k = k*dt``.  The input is treated as piecewise linear between
        grid points.
    x0 : array_like, optional
        Initial state, zero by default.
    dt : float
    t_final : float, optional
        Required if ``u`` is callable.

    Returns
    -------
    Trajectory
        ``x`` has shape ``(N+1, n)``, ``y`` shape ``(N+1, m)``, ``y_H`` shape ``(N+1,)``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ph = sys.ph if isinstance(sys, ExtendedPhSystem) else sys
    lti = ph_to_lti(ph)
    n, m = lti.n, lti.m
    if callable(u):
        if t_final is None:
            raise ValueError("t_final is required for callable inputs")
        steps = int(round(t_final / dt))
        t = dt * np.arange(steps + 1)
        U = np.array([np.broadcast_to(np.asarray(u(tk), dtype=float), (m,)) for tk in t])
    else:
        U = np.asarray(u, dtype=float).reshape(-1, m)
        steps = U.shape[0] - 1
        t = dt * np.arange(steps + 1)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)

    lhs = np.eye(n) - 0.5 * dt * lti.A
    try:
        lu = spla.lu_factor(lhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise StepFactorizationFailed(str(exc)) from exc
    if n and np.min(np.abs(np.diag(lu[0]))) == 0.0:
        raise StepFactorizationFailed("I - dt/2 A is singular")
    rhs_mat = np.eye(n) + 0.5 * dt * lti.A

    X = np.empty((steps + 1, n))
    X[0] = x
    for k in range(steps):
        rhs = rhs_mat @ X[k] + 0.5 * dt * (lti.B @ (U[k] + U[k + 1]))
        X[k + 1] = spla.lu_solve(lu, rhs)
    Y = X @ lti.C.T + U @ lti.D.T
    YH = 0.5 * np.einsum("ij,jk,ik->i", X, ph.Q, X)
    return Trajectory(t, X, Y, YH)
