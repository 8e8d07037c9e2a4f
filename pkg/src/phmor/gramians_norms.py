"""Gramians and H2 norms/distances for LTI, quadratic-output and extended pH systems.

Squared H2 quantities are evaluated with trace formulas on Gramians, e.g.

* ``||Σ||^2 = tr(C P C^T)`` for LTI systems,
* ``||Σ_H||^2 = 1/4 tr(P Q P Q) = tr(B^T O_qo B)`` for the quadratic output,
* ``dist^2 = 1/4 tr(PQPQ) + 1/4 tr(P̂Q̂P̂Q̂) - 1/2 tr(Y^T Q Y Q̂)``.

The distance formulas subtract terms of size ``||Σ||^2``, so a distance far
below ``sqrt(eps)*||Σ||`` drowns in rounding.  With ``method="auto"`` such
small results are recomputed from a square-root factor of the Gramian of the
block-diagonal error system, which retains relative accuracy.

pH inputs with singular ``Q`` are first restricted to ``range(Q)``: ``ker Q``
is invariant and invisible in both outputs, so the norms are unchanged, but
the marginal modes on ``ker Q`` would otherwise make the Gramians undefined.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import FeedthroughMismatch, NonzeroFeedthrough, Unstable
from .numkernels import solve_lyapunov, solve_lyapunov_factor, solve_sylvester
from .systems import ExtendedPhSystem, LtiqoSystem, LtiSystem, PhSystem, ph_to_lti

__all__ = [
    "GramianSet",
    "CrossGramians",
    "gramians",
    "qo_obs_gramian",
    "cross_gramians",
    "h2_norm_lti",
    "h2_norm_ltiqo",
    "h2_norm_extended",
    "h2_dist_lti",
    "h2_dist_ltiqo",
    "h2_dist_extended",
]

# below this ratio of dist^2 to the summed trace terms the trace formula is
# refined by the factored evaluation
_CANCELLATION_RATIO = 1e-6


@dataclass(frozen=True)
class GramianSet:
    P_ctrl: np.ndarray
    O_obs: np.ndarray | None = None
    O_qo: np.ndarray | None = None


@dataclass(frozen=True)
class CrossGramians:
    """Solutions of ``A Y + Y Â^T + B B̂^T = 0`` and ``A^T Z + Z Â + C^T Ĉ = 0``."""

    Y: np.ndarray
    Z: np.ndarray | None = None


def _check_stable(A, what="system"):
    if A.shape[0] and np.max(np.linalg.eigvals(A).real) >= 0:
        raise Unstable(f"{what} is not asymptotically stable")


def _visible(sys):
    from .structure import remove_unobservable_hamiltonian

    return remove_unobservable_hamiltonian(sys)


def _as_lti(sys):
    if isinstance(sys, (PhSystem, ExtendedPhSystem)):
        return ph_to_lti(_visible(sys))
    return sys


def _as_ltiqo(sys):
    if isinstance(sys, (PhSystem, ExtendedPhSystem)):
        return _visible(sys).ham
    return sys


def gramians(sys):
    """Controllability and observability Gramians of a stable LTI system.

    Examples
    --------
    >>> gramians(LtiSystem(-1.0, 1.0, 1.0, 0.0)).P_ctrl
    array([[0.5]])
    """
    sys = _as_lti(sys)
    _check_stable(sys.A)
    P = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    O = solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    return GramianSet(P, O)


def qo_obs_gramian(sys, P_ctrl=None):
    """Quadratic-output observability Gramian.

    Solves ``A^T O + O A + 1/4 Q P Q = 0`` with ``P`` the controllability
    Gramian (computed if not supplied).
    """
    sys = _as_ltiqo(sys)
    _check_stable(sys.A)
    if P_ctrl is None:
        P_ctrl = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    Q = sys.Qout
    return solve_lyapunov(sys.A.T, 0.25 * Q @ P_ctrl @ Q)


def cross_gramians(fom, rom):
    """Cross Sylvester solutions ``Y`` (and ``Z`` when both have linear outputs)."""
    A, B = fom.A, fom.B
    Ar, Br = rom.A, rom.B
    _check_stable(A, "full-order model")
    _check_stable(Ar, "reduced model")
    Y = solve_sylvester(A, Ar.T, B @ Br.T)
    Z = None
    if isinstance(fom, LtiSystem) and isinstance(rom, LtiSystem):
        Z = solve_sylvester(A.T, Ar, fom.C.T @ rom.C)
    return CrossGramians(Y, Z)


def _check_no_feedthrough(sys):
    if np.any(sys.D != 0):
        raise NonzeroFeedthrough("the H2 norm of a system with D != 0 is infinite")


def h2_norm_lti(sys, P_ctrl=None):
    """H2 norm ``sqrt(tr(C P C^T))`` of a stable LTI system with ``D = 0``."""
    sys = _as_lti(sys)
    _check_no_feedthrough(sys)
    _check_stable(sys.A)
    if P_ctrl is None:
        P_ctrl = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    return float(np.sqrt(max(np.trace(sys.C @ P_ctrl @ sys.C.T), 0.0)))


def h2_norm_ltiqo(sys, P_ctrl=None):
    """H2 norm ``sqrt(1/4 tr(P Q P Q))`` of a quadratic-output system.

    Examples
    --------
    >>> h2_norm_ltiqo(LtiqoSystem(-1.0, 1.0, 2.0))
    0.5
    """
    sys = _as_ltiqo(sys)
    _check_stable(sys.A)
    if P_ctrl is None:
        P_ctrl = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    PQ = P_ctrl @ sys.Qout
    return float(np.sqrt(max(0.25 * np.trace(PQ @ PQ), 0.0)))


def h2_norm_extended(sys):
    """``sqrt(||Σ||^2 + ||Σ_H||^2)``; the linear part ignores the feedthrough."""
    lti = _as_lti(sys)
    io = h2_norm_lti(lti.with_feedthrough(np.zeros_like(lti.D)))
    return float(np.hypot(io, h2_norm_ltiqo(sys)))


def _error_lti(fom, rom):
    A = spla.block_diag(fom.A, rom.A)
    B = np.vstack([fom.B, rom.B])
    C = np.hstack([fom.C, -rom.C])
    return A, B, C


def h2_dist_lti(fom, rom, method="auto"):
    """H2 norm of the error system ``Σ - Σ̂``.

    Parameters
    ----------
    fom, rom : LtiSystem
        Stable systems with equal feedthrough.
    method : {"auto", "trace", "factored"}
        ``"trace"`` uses ``tr(CPC^T) + tr(ĈP̂Ĉ^T) - 2 tr(C Y Ĉ^T)``;
        ``"factored"`` uses a square-root factor of the error-system Gramian;
        ``"auto"`` uses the trace formula and refines if cancellation dominates.
    """
    fom, rom = _as_lti(fom), _as_lti(rom)
    if fom.D.shape != rom.D.shape or fom.m != rom.m:
        raise FeedthroughMismatch("systems have different input/output dimensions")
    if np.linalg.norm(fom.D - rom.D) > 1e-12 * max(1.0, np.linalg.norm(fom.D)):
        raise FeedthroughMismatch("H2 distance needs identical feedthrough matrices")
    _check_stable(fom.A, "full-order model")
    _check_stable(rom.A, "reduced model")
    if method == "factored":
        return _dist_lti_factored(fom, rom)
    P = solve_lyapunov(fom.A, fom.B @ fom.B.T)
    Pr = solve_lyapunov(rom.A, rom.B @ rom.B.T)
    Y = solve_sylvester(fom.A, rom.A.T, fom.B @ rom.B.T)
    t1 = np.trace(fom.C @ P @ fom.C.T)
    t2 = np.trace(rom.C @ Pr @ rom.C.T)
    d2 = t1 + t2 - 2.0 * np.trace(fom.C @ Y @ rom.C.T)
    if method == "auto" and d2 < _CANCELLATION_RATIO * (abs(t1) + abs(t2)):
        return _dist_lti_factored(fom, rom)
    return float(np.sqrt(max(d2, 0.0)))


def _dist_lti_factored(fom, rom):
    A, B, C = _error_lti(fom, rom)
    L = solve_lyapunov_factor(A, B)
    return float(np.linalg.norm(C @ L))


def h2_dist_ltiqo(fom, rom, method="auto"):
    """H2 distance between two quadratic-output systems.

    ``dist^2 = 1/4 tr(PQPQ) + 1/4 tr(P̂Q̂P̂Q̂) - 1/2 tr(Y^T Q Y Q̂)`` with
    ``A Y + Y Â^T + B B̂^T = 0``.  See :func:`h2_dist_lti` for ``method``.
    """
    fom, rom = _as_ltiqo(fom), _as_ltiqo(rom)
    if fom.m != rom.m:
        raise ValueError("systems have different input dimensions")
    _check_stable(fom.A, "full-order model")
    _check_stable(rom.A, "reduced model")
    if method == "factored":
        return _dist_ltiqo_factored(fom, rom)
    P = solve_lyapunov(fom.A, fom.B @ fom.B.T)
    Pr = solve_lyapunov(rom.A, rom.B @ rom.B.T)
    Y = solve_sylvester(fom.A, rom.A.T, fom.B @ rom.B.T)
    PQ = P @ fom.Qout
    PrQr = Pr @ rom.Qout
    t1 = 0.25 * np.trace(PQ @ PQ)
    t2 = 0.25 * np.trace(PrQr @ PrQr)
    d2 = t1 + t2 - 0.5 * np.trace(Y.T @ fom.Qout @ Y @ rom.Qout)
    if method == "auto" and d2 < _CANCELLATION_RATIO * (abs(t1) + abs(t2)):
        return _dist_ltiqo_factored(fom, rom)
    return float(np.sqrt(max(d2, 0.0)))


def _dist_ltiqo_factored(fom, rom):
    A = spla.block_diag(fom.A, rom.A)
    B = np.vstack([fom.B, rom.B])
    Qe = spla.block_diag(fom.Qout, -rom.Qout)
    L = solve_lyapunov_factor(A, B)
    return float(0.5 * np.linalg.norm(L.conj().T @ Qe @ L))


def h2_dist_extended(fom, rom, method="auto"):
    """``sqrt(dist_io^2 + dist_ham^2)`` between two extended pH systems."""
    io = h2_dist_lti(_as_lti(fom), _as_lti(rom), method=method)
    ham = h2_dist_ltiqo(fom, rom, method=method)
    return float(np.hypot(io, ham))
