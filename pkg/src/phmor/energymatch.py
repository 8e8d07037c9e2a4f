"""Energy matching: re-choose the Hamiltonian of a passive ROM.

Given a FOM ``Σ_epH`` and a passive ROM ``(Â, B̂, Ĉ, D̂)``, every positive
definite solution ``Q̂`` of the KYP inequality ``W(Q̂) ⪰ 0`` yields a pH form
of the ROM with the *same* transfer function.  This module picks the ``Q̂``
that minimizes the H2 error of the Hamiltonian output,

    J(Q̂) = 1/4 tr(P Q P Q) + 1/4 tr(P̂ Q̂ P̂ Q̂) - 1/2 tr(Y^T Q Y Q̂),

a strictly convex quadratic, by a log-det barrier method: for decreasing
``α`` the smooth function ``J(Q̂) - α ln det W(Q̂)`` is minimized over the
half-vectorization of ``Q̂`` with BFGS.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoInteriorPoint, NotInInterior, PhmorError
from .kyp import FEEDTHROUGH_EPS, extremal_solutions, is_feasible, kyp_matrix
from .numkernels import solve_are_extremal, solve_lyapunov, solve_sylvester, sym
from .systems import ExtendedPhSystem, LtiSystem, PhSystem, lti_to_ph, ph_to_lti

__all__ = [
    "EnergyMatchProblem",
    "EnergyMatchConfig",
    "EnergyMatchResult",
    "build_problem",
    "cost",
    "grad_cost",
    "barrier",
    "grad_barrier",
    "vech",
    "vech_inv",
    "duplication_matrix",
    "bfgs_armijo",
    "energy_match",
    "export_sdp",
]

DEFAULT_ALPHAS = tuple(10.0 ** -k for k in range(3, 16))
_SINGULAR_FEEDTHROUGH = 1e-12
_INTERIOR_MARGIN = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class EnergyMatchProblem:
    """Data of the energy-matching cost.

    ``P_fom``, ``P_rom`` are the controllability Gramians, ``Y`` solves
    ``A Y + Y Â^T + B B̂^T = 0`` and ``const_term = 1/4 tr(P Q P Q)``.
    """

    P_fom: np.ndarray
    Q_fom: np.ndarray
    P_rom: np.ndarray
    Y: np.ndarray
    rom_lti: LtiSystem
    const_term: float
    YtQY: np.ndarray = field(repr=False, default=None)

    @property
    def r(self):
        return self.P_rom.shape[0]


@dataclass(frozen=True)
class EnergyMatchConfig:
    """Options of :func:`energy_match`.

    Attributes
    ----------
    alpha_schedule
        Strictly decreasing positive barrier weights.
    bfgs_grad_tol
        Stop an inner solve when ``||grad||_inf < tol * max(1, |f|)``.
    bfgs_max_iter
        Iteration limit per barrier weight.
    init_strategy
        ``"candidate_set"`` (best of ``X̂_min``, ``X̂_max`` and their midpoint)
        or ``"user_supplied"`` (use ``Q0``).
    feasibility_tol
        Relative tolerance for the final KYP feasibility check.
    Q0
        Starting point for ``init_strategy="user_supplied"``.
    """

    alpha_schedule: tuple = DEFAULT_ALPHAS
    bfgs_grad_tol: float = 1e-9
    bfgs_max_iter: int = 500
    init_strategy: str = "candidate_set"
    feasibility_tol: float = 1e-8
    Q0: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.alpha_schedule, dtype=float)
        if a.size == 0 or np.any(a <= 0) or np.any(np.diff(a) >= 0):
            raise ValueError("alpha_schedule must be positive and strictly decreasing")
        if self.init_strategy not in ("candidate_set", "user_supplied"):
            raise ValueError(f"unknown init_strategy {self.init_strategy!r}")
        if self.init_strategy == "user_supplied" and self.Q0 is None:
            raise ValueError("init_strategy='user_supplied' needs Q0")


@dataclass(frozen=True)
class EnergyMatchResult:
    """Outcome of :func:`energy_match`.

    Attributes
    ----------
    Q_opt
        Optimized reduced Hamiltonian Hessian.
    cost
        ``J(Q_opt)``, the squared Hamiltonian-output H2 error.
    cost_history
        ``J`` after each barrier weight.
    min_eig_W
        Smallest eigenvalue of the KYP matrix at ``Q_opt``.
    converged
        ``False`` if an inner solve hit its iteration limit.
    initial_cost
        ``J`` at the selected starting point (before perturbation).
    Q_init
        The selected starting point.
    candidate_costs
        ``J`` at each initialization candidate.
    rom_ph
        The ROM in pH form with ``Q = Q_opt``.
    rom_lti
        The input ROM, untouched.
    feedthrough_shift
        ``eps`` added to ``D̂`` to obtain a strict KYP interior (0 if none).
    iterations
        BFGS iterations per barrier weight.
    """

    Q_opt: np.ndarray
    cost: float
    cost_history: list
    min_eig_W: float
    converged: bool
    initial_cost: float
    Q_init: np.ndarray
    candidate_costs: dict
    rom_ph: ExtendedPhSystem
    rom_lti: LtiSystem
    feedthrough_shift: float = 0.0
    iterations: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# half-vectorization


def vech(S):
    """Stack the lower triangle of ``S`` column by column."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    r = S.shape[0]
    rows, cols = np.triu_indices(r)
    # (cols, rows) enumerates the lower triangle column-major
    return S[cols, rows].copy()


def vech_inv(q, r=None):
    """Symmetric matrix from its half-vectorization."""
    q = np.asarray(q, dtype=float).ravel()
    if r is None:
        r = int(round((np.sqrt(8 * q.size + 1) - 1) / 2))
    if r * (r + 1) // 2 != q.size:
        raise ValueError(f"vector of length {q.size} is not a half-vectorization")
    S = np.zeros((r, r))
    rows, cols = np.triu_indices(r)
    S[cols, rows] = q
    S[rows, cols] = q
    return S


def duplication_matrix(r):
    """Matrix ``D_r`` with ``vec(S) = D_r vech(S)`` (``vec`` column-major).

    Examples
    --------
    >>> duplication_matrix(2)
    array([[1., 0., 0.],
           [0., 1., 0.],
           [0., 1., 0.],
           [0., 0., 1.]])
    """
    k = r * (r + 1) // 2
    D = np.zeros((r * r, k))
    rows, cols = np.triu_indices(r)
    for idx, (j, i) in enumerate(zip(rows, cols)):
        # entry (i, j) of the lower triangle, i >= j
        D[i + j * r, idx] = 1.0
        D[j + i * r, idx] = 1.0
    return D


def _vech_grad(G):
    """Pull a symmetric full-matrix gradient back to vech coordinates: ``D_r^T vec(G)``."""
    G = sym(G)
    return vech(2.0 * G - np.diag(np.diag(G)))


# ---------------------------------------------------------------------------
# cost and barrier


def build_problem(fom, rom):
    """Solve the Gramian equations that define the cost functional.

    Parameters
    ----------
    fom : ExtendedPhSystem
        Stable on the range of its Hamiltonian Hessian.
    rom : LtiSystem
        Stable.
    """
    from .gramians_norms import _check_stable, _visible

    if isinstance(fom, (PhSystem, ExtendedPhSystem)):
        ph = _visible(fom).ph
    else:
        raise TypeError("fom must be a pH system")
    rom = ph_to_lti(rom) if isinstance(rom, (PhSystem, ExtendedPhSystem)) else rom
    A = (ph.J - ph.R) @ ph.Q
    B = ph.G - ph.P
    _check_stable(A, "full-order model")
    _check_stable(rom.A, "reduced model")
    P = solve_lyapunov(A, B @ B.T)
    Pr = solve_lyapunov(rom.A, rom.B @ rom.B.T)
    Y = solve_sylvester(A, rom.A.T, B @ rom.B.T)
    PQ = P @ ph.Q
    const = float(max(0.25 * np.trace(PQ @ PQ), 0.0))
    return EnergyMatchProblem(
        P_fom=P, Q_fom=np.array(ph.Q), P_rom=Pr, Y=Y, rom_lti=rom,
        const_term=const, YtQY=sym(Y.T @ ph.Q @ Y),
    )


def _ytqy(prob):
    if prob.YtQY is not None:
        return prob.YtQY
    return sym(prob.Y.T @ prob.Q_fom @ prob.Y)


def cost(prob, Qhat):
    """``J(Q̂) = c + 1/4 tr(P̂ Q̂ P̂ Q̂) - 1/2 tr(Y^T Q Y Q̂)``."""
    Qhat = np.atleast_2d(np.asarray(Qhat, dtype=float))
    PQ = prob.P_rom @ Qhat
    return float(prob.const_term + 0.25 * np.trace(PQ @ PQ)
                 - 0.5 * np.sum(_ytqy(prob) * Qhat))


def grad_cost(prob, Qhat):
    """Gradient ``1/2 (P̂ Q̂ P̂ - Y^T Q Y)`` of :func:`cost` (symmetric)."""
    Qhat = np.atleast_2d(np.asarray(Qhat, dtype=float))
    return sym(0.5 * (prob.P_rom @ Qhat @ prob.P_rom - _ytqy(prob)))


def _lti(rom):
    return ph_to_lti(rom) if isinstance(rom, (PhSystem, ExtendedPhSystem)) else rom


def barrier(rom, Qhat):
    """``-ln det W(Q̂)`` if the KYP matrix is positive definite, else ``+inf``."""
    W = kyp_matrix(_lti(rom), np.atleast_2d(Qhat))
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        return np.inf
    return float(-2.0 * np.sum(np.log(np.diag(L))))


def grad_barrier(rom, Qhat):
    """Gradient of :func:`barrier` with respect to symmetric ``Q̂``.

    Equal to ``M + M^T`` with ``M = [Â  B̂] W(Q̂)^{-1} [I; 0]``.

    Raises
    ------
    NotInInterior
        If ``W(Q̂)`` is not positive definite.
    """
    rom = _lti(rom)
    Qhat = np.atleast_2d(np.asarray(Qhat, dtype=float))
    W = kyp_matrix(rom, Qhat)
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise NotInInterior("KYP matrix is not positive definite") from exc
    r = rom.n
    E = np.zeros((W.shape[0], r))
    E[:r] = np.eye(r)
    Z = np.linalg.solve(L.T, np.linalg.solve(L, E))  # W^{-1} [I; 0]
    M = np.hstack([rom.A, rom.B]) @ Z
    return sym(M + M.T)


# ---------------------------------------------------------------------------
# optimizer


def bfgs_armijo(fun, grad, x0, grad_tol=1e-9, max_iter=500, c1=1e-4, min_step=1e-20,
                stall_iter=3, H0=None):
    """Minimize ``fun`` with BFGS and backtracking (Armijo) line search.

    ``fun`` may return ``+inf`` outside its domain; such trial points fail
    the sufficient-decrease test and the step is halved.  ``H0`` is an
    optional initial inverse-Hessian approximation (default: a scaled
    identity).

    Returns
    -------
    x : ndarray
    fx : float
    n_iter : int
    status : {"converged", "stalled", "max_iter"}
        ``"stalled"`` means that ``fun`` could not be decreased beyond its
        rounding level any more (the iterate is optimal to working
        precision even though the gradient test was not met).
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = fun(x)
    if not np.isfinite(fx):
        raise ValueError("starting point is outside the domain")
    g = grad(x)
    k = x.size
    gmax = np.max(np.abs(g)) if k else 0.0
    # first trial step no longer than the size of x
    if H0 is None:
        H = np.eye(k) * min(1.0, max(np.max(np.abs(x)) if k else 1.0, 1.0) / max(gmax, 1e-300))
        first = True
    else:
        H = np.array(H0, dtype=float)
        first = False
    flat = 0
    rounding = 10 * np.finfo(float).eps
    for it in range(max_iter):
        if np.max(np.abs(g)) < grad_tol * max(1.0, abs(fx)):
            return x, fx, it, "converged"
        p = -H @ g
        slope = g @ p
        if slope >= 0:
            H = np.eye(k) * min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-300))
            p = -H @ g
            slope = g @ p
        t = 1.0
        while True:
            xn = x + t * p
            fn = fun(xn)
            if np.isfinite(fn) and fn <= fx + c1 * t * slope:
                break
            t *= 0.5
            if t < min_step:
                return x, fx, it, "stalled"
        gn = grad(xn)
        s = xn - x
        y = gn - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = (sy / (y @ y)) * np.eye(k)
                first = False
            rho = 1.0 / sy
            Hy = H @ y
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * (y @ Hy) + rho) * np.outer(s, s))
        flat = flat + 1 if fx - fn <= rounding * abs(fx) else 0
        x, fx, g = xn, fn, gn
        if flat >= stall_iter:
            return x, fx, it + 1, "stalled"
    if np.max(np.abs(g)) < grad_tol * max(1.0, abs(fx)):
        return x, fx, max_iter, "converged"
    return x, fx, max_iter, "max_iter"


def _is_interior(rom, Z):
    """Strict KYP feasibility with a margin above the rounding level."""
    W = kyp_matrix(rom, Z)
    try:
        np.linalg.cholesky(W)
        np.linalg.cholesky(Z)
    except np.linalg.LinAlgError:
        return False
    # a Cholesky factor can exist for boundary points at rounding level;
    # demand a margin so that the barrier is numerically meaningful
    return np.linalg.eigvalsh(W)[0] > _INTERIOR_MARGIN * np.linalg.norm(W, 2)


def _interior_point(rom, X, anchor=None, max_doublings=200):
    """Push ``X`` into the strict interior of the KYP feasible set.

    First ``X + δI`` and ``X - δI`` (the latter is the way inwards from
    ``X_max``) with ``δ = 1e-8 ||X||`` doubled until ``W`` has a Cholesky
    factor and ``λ_min(W) > 100 eps ||W||``; if ``δ`` exceeds ``||X||``
    without success, move along the segment towards ``anchor`` instead.
    """
    def interior(Z):
        return _is_interior(rom, Z)

    if interior(X):
        return X
    nX = max(np.linalg.norm(X, 2), np.finfo(float).tiny)
    delta = 1e-8 * nX
    I = np.eye(X.shape[0])
    while delta <= nX:
        for sgn in (1.0, -1.0):
            Z = X + sgn * delta * I
            if interior(Z):
                return Z
        delta *= 2.0
    if anchor is not None:
        t = 1e-8
        for _ in range(max_doublings):
            if t > 1.0:
                break
            Z = (1.0 - t) * X + t * anchor
            if interior(Z):
                return Z
            t *= 2.0
    return None


def _kyp_basis(rom, r):
    """Derivatives ``dW/dq_i`` of the KYP matrix along the vech coordinates."""
    k = r * (r + 1) // 2
    m = rom.m
    out = np.zeros((k, r + m, r + m))
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        E = vech_inv(e, r)
        out[i, :r, :r] = -rom.A.T @ E - E @ rom.A
        out[i, :r, r:] = -E @ rom.B
        out[i, r:, :r] = -rom.B.T @ E
    return out


def _cost_hessian(prob):
    """Constant Hessian of the cost in vech coordinates: ``1/2 tr(P̂ E_a P̂ E_b)``."""
    r = prob.r
    k = r * (r + 1) // 2
    E = np.array([vech_inv(np.eye(k)[i], r) for i in range(k)])
    PE = np.einsum("ij,ajk->aik", prob.P_rom, E)
    return 0.5 * np.einsum("aij,bji->ab", PE, PE)


def _barrier_hessian(rom, X, basis):
    """Hessian ``tr(W^{-1} A_a W^{-1} A_b)`` of the barrier in vech coordinates."""
    Winv = np.linalg.inv(kyp_matrix(rom, X))
    WA = np.einsum("ij,ajk->aik", Winv, basis)
    return np.einsum("aij,bji->ab", WA, WA)


def _inverse_spd(H):
    """Inverse of a symmetric positive definite matrix, ``None`` if it is not."""
    H = sym(H)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    Linv = np.linalg.solve(L, np.eye(H.shape[0]))
    return Linv.T @ Linv


def _phase_one(rom, X0, is_interior, gap_rel=1e-2, max_outer=40):
    """Find a deep interior point of the KYP feasible set.

    Maximizes the margin ``-s`` subject to ``W(X) + sI ≻ 0`` with a
    log-barrier method, ``min t s - ln det(W(X) + sI)`` over
    ``(vech X, s)``, solved by damped Newton steps (the Hessian
    ``tr(W^{-1} A_a W^{-1} A_b)`` is cheap for the small ROM sizes involved).
    Stops when the duality gap ``N/t`` is below ``gap_rel |s|`` with
    ``s < 0``.  Returns ``None`` if no strictly feasible ``X`` is found.
    """
    r = X0.shape[0]
    basis = _kyp_basis(rom, r)
    k, N, _ = basis.shape
    W0 = kyp_matrix(rom, X0)
    scale = max(np.linalg.norm(W0, 2), np.finfo(float).tiny)
    s = max(0.0, -np.linalg.eigvalsh(W0)[0]) + 1e-2 * scale
    q = vech(X0)
    I = np.eye(N)

    def phi(q, s, t):
        try:
            L = np.linalg.cholesky(kyp_matrix(rom, vech_inv(q, r)) + s * I)
        except np.linalg.LinAlgError:
            return np.inf
        return t * s - 2.0 * np.sum(np.log(np.diag(L)))

    t = N / s
    for _ in range(max_outer):
        for _newton in range(100):
            Ws = kyp_matrix(rom, vech_inv(q, r)) + s * I
            Winv = np.linalg.inv(Ws)
            WA = np.einsum("ij,ajk->aik", Winv, basis)
            g = np.append(-np.einsum("aii->a", WA), t - np.trace(Winv))
            H = np.empty((k + 1, k + 1))
            H[:k, :k] = np.einsum("aij,bji->ab", WA, WA)
            H[:k, k] = H[k, :k] = np.einsum("aij,ji->a", WA, Winv)
            H[k, k] = np.sum(Winv * Winv.T)
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec2 = -g @ step
            if not np.isfinite(dec2) or dec2 < 1e-10:
                break
            f0 = phi(q, s, t)
            a = 1.0
            while a > 1e-12:
                fn = phi(q + a * step[:k], s + a * step[k], t)
                if fn <= f0 - 0.25 * a * dec2:
                    break
                a *= 0.5
            else:
                break
            q, s = q + a * step[:k], s + a * step[k]
        X = vech_inv(q, r)
        if s < 0 and N / t < gap_rel * abs(s) and is_interior(X):
            return X
        t *= 10.0
    X = vech_inv(q, r)
    return X if s < 0 and is_interior(X) else None


def _strict_feedthrough(rom):
    lam = np.linalg.eigvalsh(rom.D + rom.D.T) if rom.m else np.ones(1)
    if np.min(lam) < _SINGULAR_FEEDTHROUGH:
        return rom.with_feedthrough(rom.D + FEEDTHROUGH_EPS * np.eye(rom.m)), FEEDTHROUGH_EPS
    return rom, 0.0


def energy_match(fom, rom, cfg=None, prob=None):
    """Optimal Hamiltonian for a passive ROM (barrier method).

    Parameters
    ----------
    fom : ExtendedPhSystem
    rom : LtiSystem, ExtendedPhSystem or PhSystem
        Passive and stable.  Its state-space matrices are never modified.
    cfg : EnergyMatchConfig, optional
    prob : EnergyMatchProblem, optional
        Reuse a problem from :func:`build_problem`.

    Returns
    -------
    EnergyMatchResult

    Raises
    ------
    NoInteriorPoint
        If no initialization candidate can be moved into the interior of the
        KYP feasible set.
    """
    cfg = EnergyMatchConfig() if cfg is None else cfg
    rom_in = _lti(rom)
    rom_reg, shift = _strict_feedthrough(rom_in)
    prob = build_problem(fom, rom_in) if prob is None else prob
    r = rom_in.n

    # --- initialization
    candidates = {}
    if cfg.init_strategy == "user_supplied":
        candidates["user"] = sym(np.atleast_2d(np.asarray(cfg.Q0, dtype=float)))
        try:
            cmin, cmax = extremal_solutions(rom_reg)
            anchor = sym(0.5 * (cmin.X + cmax.X))
        except PhmorError:
            anchor = None
    else:
        candidates["X_min"] = solve_are_extremal(rom_reg.A, rom_reg.B, rom_reg.C, rom_reg.D,
                                                 "min").X
        anchor = None
        try:
            X_max = solve_are_extremal(rom_reg.A, rom_reg.B, rom_reg.C, rom_reg.D, "max").X
        except PhmorError:
            # X_max may not be computable (e.g. nearly lossless ROMs); X_min suffices
            X_max = None
        if X_max is not None:
            candidates["X_max"] = X_max
            candidates["midpoint"] = anchor = sym(0.5 * (candidates["X_min"] + X_max))
    if isinstance(rom, (PhSystem, ExtendedPhSystem)):
        # the Hamiltonian the ROM came with is a feasible candidate as well
        own = rom.ph.Q if isinstance(rom, ExtendedPhSystem) else rom.Q
        candidates["rom_Q"] = sym(own)
    cand_costs = {k: cost(prob, v) for k, v in candidates.items()}
    order = sorted(candidates, key=lambda k: cand_costs[k])
    X0 = None
    for name in order:
        X0 = _interior_point(rom_reg, candidates[name], anchor)
        if X0 is not None:
            init_name = name
            break
    if X0 is None:
        # thin feasible sets (nearly singular dissipation, tiny feedthrough):
        # search for a deep interior point explicitly
        for name in order:
            X0 = _phase_one(rom_reg, candidates[name], lambda Z: _is_interior(rom_reg, Z))
            if X0 is not None:
                init_name = name
                break
    if X0 is None:
        raise NoInteriorPoint("no strictly feasible starting point found")

    # --- barrier path
    # each BFGS run starts from the inverse of the exact Hessian at its warm
    # start; the feasible set can be very thin, and a scaled identity then
    # needs thousands of iterations
    basis = _kyp_basis(rom_reg, r)
    Hc = _cost_hessian(prob)
    q = vech(X0)
    history, iters = [], []
    converged = True
    for alpha in cfg.alpha_schedule:
        def f(v, alpha=alpha):
            X = vech_inv(v, r)
            b = barrier(rom_reg, X)
            return np.inf if not np.isfinite(b) else cost(prob, X) + alpha * b

        def g(v, alpha=alpha):
            X = vech_inv(v, r)
            return _vech_grad(grad_cost(prob, X) + alpha * grad_barrier(rom_reg, X))

        H0 = _inverse_spd(Hc + alpha * _barrier_hessian(rom_reg, vech_inv(q, r), basis))
        q, _, n_it, status = bfgs_armijo(f, g, q, cfg.bfgs_grad_tol, cfg.bfgs_max_iter, H0=H0)
        iters.append(n_it)
        if status == "max_iter":
            converged = False
        history.append(cost(prob, vech_inv(q, r)))

    Q_opt = vech_inv(q, r)
    best = cost(prob, Q_opt)
    # never return something worse than a feasible initialization candidate
    for name, X in candidates.items():
        ok, _ = is_feasible(rom_reg, X, cfg.feasibility_tol)
        if ok and cand_costs[name] < best:
            Q_opt, best = X, cand_costs[name]
    ok, min_eig_W = is_feasible(rom_reg, Q_opt, cfg.feasibility_tol)
    rom_ph = ExtendedPhSystem(lti_to_ph(rom_reg, Q_opt, tol=cfg.feasibility_tol))
    return EnergyMatchResult(
        Q_opt=Q_opt,
        cost=best,
        cost_history=history,
        min_eig_W=min_eig_W,
        converged=converged,
        initial_cost=cand_costs[init_name],
        Q_init=candidates[init_name],
        candidate_costs=cand_costs,
        rom_ph=rom_ph,
        rom_lti=rom_in,
        feedthrough_shift=shift,
        iterations=iters,
    )


# ---------------------------------------------------------------------------
# SDP export


def _write_block(fh, name, M):
    M = np.atleast_2d(M)
    fh.write(f"{name} {M.shape[0]} {M.shape[1]}\n")
    for row in M:
        fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def export_sdp(prob, path, rom=None):
    """Write the energy-matching problem as a quadratic SDP in ``q = vech(Q̂)``.

    The file (format tag ``EMSDP1``) describes::

        minimize    c0 + g^T q + 1/2 q^T H q
        subject to  F0 + sum_i q_i F_i  ⪰ 0

    See the README for the exact layout.
    """
    rom = prob.rom_lti if rom is None else _lti(rom)
    r = prob.r
    k = r * (r + 1) // 2
    Dr = duplication_matrix(r)
    H = 0.5 * Dr.T @ np.kron(prob.P_rom, prob.P_rom) @ Dr
    g = -0.5 * Dr.T @ _ytqy(prob).reshape(-1, order="F")
    F0 = kyp_matrix(rom, np.zeros((r, r)))
    with open(path, "w") as fh:
        fh.write(f"EMSDP1 {r} {rom.m} {k}\n")
        fh.write("# minimize c0 + g^T q + 1/2 q^T H q  s.t.  F0 + sum_i q_i F_i >= 0,  q = vech(Qhat)\n")
        _write_block(fh, "c0", [[prob.const_term]])
        _write_block(fh, "g", g.reshape(1, -1))
        _write_block(fh, "H", H)
        _write_block(fh, "F0", F0)
        for i in range(k):
            e = np.zeros(k)
            e[i] = 1.0
            _write_block(fh, f"F{i + 1}", kyp_matrix(rom, vech_inv(e, r)) - F0)
