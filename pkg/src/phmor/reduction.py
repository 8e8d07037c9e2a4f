"""Passivity-preserving reducers: positive-real balanced truncation and pH-IRKA."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .errors import RankDeficient, ShiftSolveSingular
from .kyp import regularize_feedthrough
from .numkernels import solve_are_extremal
from .numkernels import EPS, skew, sym
from .systems import ExtendedPhSystem, LtiSystem, PhSystem, lti_to_ph, ph_to_lti

__all__ = ["RomResult", "prbt", "phirka", "psd_factor"]


@dataclass(frozen=True)
class RomResult:
    """Reduced-order model in pH and state-space form.

    Attributes
    ----------
    rom_ph : ExtendedPhSystem
    rom_lti : LtiSystem
        Equal to ``ph_to_lti(rom_ph)``.
    method_tag : {"prbt", "phirka"}
    iterations : int or None
        Number of pH-IRKA iterations.
    shift_history : list or None
        Shifts used in each pH-IRKA iteration.
    converged : bool
        ``False`` if pH-IRKA hit ``max_iter``; the last iterate is returned.
    char_values : ndarray or None
        Leading ``r`` positive-real characteristic values (PRBT), descending.
    feedthrough_shift : float
        Artificial feedthrough ``eps`` added to ``D`` before PRBT (0 if none).
        It is kept in the ROM; compare against the FOM with the same shift.
    """

    rom_ph: ExtendedPhSystem
    rom_lti: LtiSystem
    method_tag: str
    iterations: int | None = None
    shift_history: list | None = None
    converged: bool = True
    char_values: np.ndarray | None = None
    feedthrough_shift: float = 0.0

    @property
    def r(self):
        return self.rom_lti.n


def psd_factor(X):
    """Factor ``F`` with ``X = F F^T`` (Cholesky, eigen-factor fallback for PSD ``X``)."""
    X = sym(X)
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        lam, U = np.linalg.eigh(X)
        return U * np.sqrt(np.clip(lam, 0.0, None))


def _normalize_signs(T, W):
    """Flip column pairs so the largest-magnitude entry of each ``T`` column is positive."""
    idx = np.argmax(np.abs(T), axis=0)
    s = np.sign(T[idx, np.arange(T.shape[1])])
    s[s == 0] = 1.0
    return T * s, W * s


def prbt(fom, r):
    """Positive-real balanced truncation.

    Balances the stabilizing solutions ``X`` of the primal and ``Y`` of the
    dual passivity Riccati equation (square-root method) and truncates to
    order ``r``.  The reduced pH form uses the ROM's own minimal KYP solution.

    Parameters
    ----------
    fom : LtiSystem or ExtendedPhSystem
        Stable, minimal, passive.  If ``D + D^T`` is singular an artificial
        feedthrough ``1e-6 * I`` is added (see ``feedthrough_shift``).
    r : int

    Returns
    -------
    RomResult
    """
    lti = ph_to_lti(fom) if isinstance(fom, (PhSystem, ExtendedPhSystem)) else fom
    if not 1 <= r <= lti.n:
        raise ValueError(f"reduced order must lie in [1, {lti.n}], got {r}")
    lti, shift = regularize_feedthrough(lti)
    A, B, C, D = lti.A, lti.B, lti.C, lti.D
    X = solve_are_extremal(A, B, C, D, "min").X
    Y = solve_are_extremal(A.T, C.T, B.T, D.T, "min").X

    Lx = psd_factor(X)
    Ly = psd_factor(Y)
    U, s, Vt = np.linalg.svd(Lx.T @ Ly)
    thresh = max(lti.n, 1) * EPS * (s[0] if s.size else 0.0)
    if np.sum(s > thresh) < r:
        raise RankDeficient(
            f"only {int(np.sum(s > thresh))} positive characteristic values, need {r}"
        )
    sr = s[:r] ** -0.5
    T = Ly @ Vt[:r].T * sr
    W = Lx @ U[:, :r] * sr
    T, W = _normalize_signs(T, W)
    rom = LtiSystem(W.T @ A @ T, W.T @ B, C @ T, D)
    Xr = solve_are_extremal(rom.A, rom.B, rom.C, rom.D, "min").X
    rom_ph = ExtendedPhSystem(lti_to_ph(rom, Xr))
    return RomResult(
        rom_ph=rom_ph,
        rom_lti=ph_to_lti(rom_ph),
        method_tag="prbt",
        char_values=s[:r].copy(),
        feedthrough_shift=shift,
    )


def _default_shifts(A, r, rng, m):
    lam = np.abs(np.linalg.eigvals(A))
    lam = lam[lam > 0]
    lo, hi = (lam.min(), lam.max()) if lam.size else (1.0, 1.0)
    shifts = np.logspace(np.log10(lo), np.log10(hi), r).astype(complex)
    tang = rng.standard_normal((r, m))
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    return shifts, tang.astype(complex)


def _is_real(z, scale):
    return abs(z.imag) <= 1e-10 * max(abs(z), scale)


def _projection_basis(A, B, shifts, tangents):
    n = A.shape[0]
    scale = max(np.max(np.abs(shifts)), EPS)
    cols = []
    for sigma, b in zip(shifts, tangents):
        if not _is_real(sigma, scale) and sigma.imag < 0:
            continue  # handled with its conjugate partner
        M = sigma * np.eye(n) - A
        try:
            lu = spla.lu_factor(M, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ShiftSolveSingular(str(exc)) from exc
        if np.min(np.abs(np.diag(lu[0]))) <= n * EPS * np.linalg.norm(M, 1):
            raise ShiftSolveSingular(f"sigma I - A is singular at sigma={sigma}")
        v = spla.lu_solve(lu, B @ b)
        if _is_real(sigma, scale):
            cols.append(v.real if np.linalg.norm(v.real) >= np.linalg.norm(v.imag) else v.imag)
        else:
            cols.extend([v.real, v.imag])
    V = np.column_stack(cols)
    Qv, Rv = np.linalg.qr(V)
    d = np.abs(np.diag(Rv))
    if d.size == 0 or d.min() <= max(V.shape) * EPS * d.max():
        raise RankDeficient("interpolation basis is rank deficient")
    return Qv


def _galerkin_ph(ph, V):
    M = V.T @ ph.Q @ V
    try:
        cho = spla.cho_factor(sym(M))
    except np.linalg.LinAlgError:
        V, _ = np.linalg.qr(V)
        cho = spla.cho_factor(sym(V.T @ ph.Q @ V))
    W = spla.cho_solve(cho, (ph.Q @ V).T).T
    return PhSystem(
        J=skew(W.T @ ph.J @ W),
        R=sym(W.T @ ph.R @ W),
        Q=sym(V.T @ ph.Q @ V),
        G=W.T @ ph.G,
        P=W.T @ ph.P,
        S=ph.S,
        N=ph.N,
    )


def _sorted_shifts(s):
    return np.array(sorted(s, key=lambda z: (round(z.real, 12), z.imag)))


def phirka(fom, r, max_iter=100, shift_tol=1e-6, initial_shifts=None,
           initial_tangents=None, seed=0):
    """Structure-preserving iterative rational Krylov algorithm.

    Each iteration builds ``V`` from tangential shifted solves
    ``(σ_i I - A)^{-1} B b_i`` (conjugate pairs contribute real and
    imaginary parts), sets ``W = Q V (V^T Q V)^{-1}`` and projects
    ``Ĵ = W^T J W``, ``R̂ = W^T R W``, ``Q̂ = V^T Q V``, ``Ĝ = W^T G``,
    ``P̂ = W^T P``.  The next shifts are the mirrored ROM poles and the
    tangents the corresponding residue directions.

    Parameters
    ----------
    fom : ExtendedPhSystem or PhSystem
        Stable, ``Q`` positive definite.
    r : int
    max_iter : int
    shift_tol : float
        Stop when the largest relative change of the sorted shifts is below it.
    initial_shifts, initial_tangents : array_like, optional
        Closed under complex conjugation.  Default: ``r`` real shifts spaced
        logarithmically between the smallest and largest pole magnitude of
        the FOM and random unit tangents drawn from ``seed``.

    Returns
    -------
    RomResult
        ``converged`` is ``False`` if ``max_iter`` was reached.
    """
    ph = fom.ph if isinstance(fom, ExtendedPhSystem) else fom
    if not 1 <= r <= ph.n:
        raise ValueError(f"reduced order must lie in [1, {ph.n}], got {r}")
    A = (ph.J - ph.R) @ ph.Q
    B = ph.G - ph.P
    rng = np.random.default_rng(seed)
    shifts, tangents = _default_shifts(A, r, rng, ph.m)
    if initial_shifts is not None:
        shifts = np.asarray(initial_shifts, dtype=complex).ravel()
        if initial_tangents is None:
            tangents = np.ones((shifts.size, ph.m), dtype=complex) / np.sqrt(ph.m)
    if initial_tangents is not None:
        tangents = np.asarray(initial_tangents, dtype=complex).reshape(shifts.size, ph.m)

    history = [shifts.copy()]
    converged = False
    it = 0
    rom = None
    for it in range(1, max_iter + 1):
        V = _projection_basis(A, B, shifts, tangents)
        rom = _galerkin_ph(ph, V)
        Ar = (rom.J - rom.R) @ rom.Q
        Br = rom.G - rom.P
        lam, X = np.linalg.eig(Ar)
        new_tangents = np.linalg.solve(X, Br.astype(complex))
        new_shifts = -lam
        old = _sorted_shifts(shifts)
        new = _sorted_shifts(new_shifts)
        change = np.max(np.abs(new - old) / np.maximum(np.abs(new), EPS)) if old.size == new.size else np.inf
        shifts, tangents = new_shifts, new_tangents
        history.append(shifts.copy())
        if change < shift_tol:
            converged = True
            break
    rom_ph = ExtendedPhSystem(rom)
    return RomResult(
        rom_ph=rom_ph,
        rom_lti=ph_to_lti(rom_ph),
        method_tag="phirka",
        iterations=it,
        shift_history=history,
        converged=converged,
    )
