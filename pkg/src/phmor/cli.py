"""Command-line front end: ``phmor <command> ...``.

The reduction workflow is composed from files::

    phmor gen msd --n-masses 50 -o fom.phm
    phmor minreal fom.phm -o min.phm
    phmor reduce min.phm -r 10 --method prbt -o rom.phm
    phmor energy-match min.phm rom.phm -o rom_em.phm
    phmor h2 fom.phm rom_em.phm --which ham

Every command that writes a file also writes ``<file>.manifest``, a flat
``key=value`` record of the command, inputs, parameters, tolerances, seed,
tool version and wall time.

Exit codes: 0 success, 1 domain failure (invalid system, reducer or
optimizer failure), 2 usage or I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import __version__
from .bench_io import (
    gen_msd,
    gen_paper_example,
    gen_rcl,
    read_system,
    write_results_csv,
    write_system,
)
from .energymatch import EnergyMatchConfig, build_problem, cost, energy_match, export_sdp
from .errors import ParseError, PhmorError
from .gramians_norms import (
    h2_dist_lti,
    h2_dist_ltiqo,
    h2_norm_lti,
    h2_norm_ltiqo,
)
from .kyp import FEEDTHROUGH_EPS, extremal_solutions
from .reduction import phirka, prbt
from .structure import DEFAULT_TOL, kalman_full_form
from .systems import (
    ExtendedPhSystem,
    LtiSystem,
    PhSystem,
    evaluate_transfer,
    lti_to_ph,
    ph_to_lti,
    simulate,
    validate_ph,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad command-line input detected after argument parsing."""


# ---------------------------------------------------------------------------
# helpers


def write_manifest(path, **entries):
    """Write ``key=value`` lines; lists are comma-joined."""
    with open(path, "w") as fh:
        for key, val in entries.items():
            if isinstance(val, (list, tuple)):
                val = ",".join(str(v) for v in val)
            fh.write(f"{key}={val}\n")


def read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def _manifest(args, out, t0, **extra):
    entries = dict(command=args.command, tool_version=__version__)
    entries.update(extra)
    entries["wall_time_s"] = f"{time.perf_counter() - t0:.6f}"
    write_manifest(str(out) + ".manifest", **entries)


def _require_ph(sysobj, what):
    if not isinstance(sysobj, ExtendedPhSystem):
        raise UsageError(f"{what} must be a PHMX1 (pH) file")
    return sysobj


def _lti_of(sysobj):
    return ph_to_lti(sysobj) if isinstance(sysobj, (PhSystem, ExtendedPhSystem)) else sysobj


def _align_feedthrough(fom, rom_lti):
    """Add the artificial feedthrough of a regularized ROM to the FOM.

    Returns ``(fom, shift)``; ``fom`` is unchanged unless ``D̂ - D = εI``
    with ``0 < ε <= FEEDTHROUGH_EPS``.
    """
    fl = _lti_of(fom)
    if fl.D.shape != rom_lti.D.shape:
        return fom, 0.0
    diff = rom_lti.D - fl.D
    eps = float(diff[0, 0]) if diff.size else 0.0
    if 0 < eps <= FEEDTHROUGH_EPS * (1 + 1e-9) and np.allclose(diff, eps * np.eye(fl.m),
                                                                rtol=0, atol=1e-15):
        if isinstance(fom, ExtendedPhSystem):
            ph = fom.ph
            shifted = PhSystem(ph.J, ph.R, ph.Q, ph.G, ph.P, ph.S + eps * np.eye(ph.m), ph.N)
            return ExtendedPhSystem(shifted), eps
        return fom.with_feedthrough(fom.D + eps * np.eye(fom.m)), eps
    return fom, 0.0


def _io_errors(fom, rom):
    fl, rl = _lti_of(fom), _lti_of(rom)
    fom_a, _ = _align_feedthrough(fom, rl)
    d = h2_dist_lti(_lti_of(fom_a), rl)
    ref = h2_norm_lti(fl.with_feedthrough(np.zeros_like(fl.D)))
    return d, d / ref if ref > 0 else np.inf


def _ham_errors(fom, rom):
    d = h2_dist_ltiqo(fom, rom)
    ref = h2_norm_ltiqo(fom)
    return d, d / ref if ref > 0 else np.inf


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def _parse_ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def _frequency_samples(lti, k=20):
    return np.array([evaluate_transfer(lti, 1j * w) for w in np.logspace(-3, 3, k)])


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args):
    sysobj = read_system(args.path)
    if isinstance(sysobj, LtiSystem):
        raise UsageError("validate needs a PHMX1 (pH) file")
    report = validate_ph(sysobj, tol=args.tol)
    if report.ok:
        print(f"{args.path}: valid pH system (n={sysobj.n}, m={sysobj.m})")
        return EXIT_OK
    print(f"{args.path}: not a valid pH system")
    for v in report.violations:
        print(f"  {v}")
    return EXIT_DOMAIN


def cmd_minreal(args):
    t0 = time.perf_counter()
    fom = _require_ph(read_system(args.path), "input")
    rep = kalman_full_form(fom, tol=args.tol)
    mr = rep.subsystem
    io_abs = ham_abs = 0.0
    if mr.n:
        io_abs = h2_dist_lti(_lti_of(fom).with_feedthrough(np.zeros((fom.m, fom.m))),
                             _lti_of(mr).with_feedthrough(np.zeros((fom.m, fom.m))))
        ham_abs = h2_dist_ltiqo(fom, mr)
    dist = float(np.hypot(io_abs, ham_abs))
    write_system(mr, args.output, comment=f"minimal realization of {args.path}")
    print(f"dims (n_co, n_cbar_o, n_c_obar, n_cbar_obar) = {rep.dims}")
    print(f"order {fom.n} -> {mr.n}")
    print(f"extended H2 distance = {dist:.6e}")
    _manifest(args, args.output, t0, input=args.path, output=args.output, tol=rep.tol_used,
              dims=list(rep.dims), order_in=fom.n, order_out=mr.n, h2_extended_distance=dist,
              zero_block_residual=rep.zero_block_residual)
    return EXIT_OK


def cmd_reduce(args):
    t0 = time.perf_counter()
    fom = read_system(args.path)
    if args.method == "prbt":
        res = prbt(fom, args.order)
    else:
        res = phirka(_require_ph(fom, "input for phirka"), args.order, max_iter=args.max_iter,
                     shift_tol=args.shift_tol, seed=args.seed)
        if not res.converged:
            print(f"warning: pH-IRKA did not converge in {args.max_iter} iterations",
                  file=sys.stderr)
    write_system(res.rom_ph, args.output, comment=f"{args.method} ROM of {args.path}")
    print(f"{args.method}: order {fom.n} -> {res.r}")
    if res.char_values is not None:
        print("characteristic values: " + " ".join(f"{v:.6e}" for v in res.char_values))
    _manifest(args, args.output, t0, input=args.path, output=args.output, method=args.method,
              order=args.order, seed=args.seed, max_iter=args.max_iter, shift_tol=args.shift_tol,
              iterations=res.iterations, converged=res.converged,
              feedthrough_shift=res.feedthrough_shift)
    return EXIT_OK


def cmd_energy_match(args):
    t0 = time.perf_counter()
    fom = _require_ph(read_system(args.fom), "FOM")
    rom = read_system(args.rom)
    rom_lti = _lti_of(rom)
    kw = {}
    if args.alpha_schedule:
        kw["alpha_schedule"] = tuple(_parse_floats(args.alpha_schedule))
    try:
        cfg = EnergyMatchConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    prob = build_problem(fom, rom_lti)
    if args.sdp_export:
        export_sdp(prob, args.sdp_export)
    Q_before = rom.ph.Q if isinstance(rom, ExtendedPhSystem) else extremal_solutions(rom_lti)[0].X
    before = _lti_of(rom)
    samples_before = _frequency_samples(before)

    res = energy_match(fom, rom, cfg, prob=prob)

    samples_after = _frequency_samples(res.rom_lti)
    if not np.array_equal(samples_before, samples_after):
        raise PhmorError("internal error: the io transfer function changed")
    c0 = cost(prob, Q_before)
    ham0 = float(np.sqrt(max(c0, 0.0)))
    ham1 = float(np.sqrt(max(res.cost, 0.0)))
    norm = h2_norm_ltiqo(fom)
    write_system(res.rom_ph, args.output, comment=f"energy-matched ROM of {args.rom}")
    print(f"cost before = {c0:.10e}")
    print(f"cost after  = {res.cost:.10e}")
    print(f"Hamiltonian H2 error before = {ham0:.6e} (rel {ham0 / norm:.6e})")
    print(f"Hamiltonian H2 error after  = {ham1:.6e} (rel {ham1 / norm:.6e})")
    if c0 > 0:
        print(f"improvement = {100.0 * (ham0 - ham1) / ham0:.4f} %")
    if res.Q_opt.size == 1:
        print(f"Q_opt = {res.Q_opt[0, 0]:.12g}")
    if not res.converged:
        print("warning: an inner BFGS solve hit its iteration limit", file=sys.stderr)
    _manifest(args, args.output, t0, fom=args.fom, rom=args.rom, output=args.output,
              alpha_schedule=list(cfg.alpha_schedule), bfgs_grad_tol=cfg.bfgs_grad_tol,
              bfgs_max_iter=cfg.bfgs_max_iter, feasibility_tol=cfg.feasibility_tol,
              cost_before=c0, cost_after=res.cost, converged=res.converged,
              feedthrough_shift=res.feedthrough_shift, sdp_export=args.sdp_export or "")
    return EXIT_OK


def cmd_h2(args):
    fom = read_system(args.fom)
    rom = read_system(args.rom)
    rows = []
    if args.which in ("io", "extended"):
        rows.append(("io",) + _io_errors(fom, rom))
    if args.which in ("ham", "extended"):
        if not (isinstance(fom, ExtendedPhSystem) and isinstance(rom, ExtendedPhSystem)):
            raise UsageError("the Hamiltonian error needs two PHMX1 files")
        rows.append(("ham",) + _ham_errors(fom, rom))
    if args.which == "extended":
        fl = _lti_of(fom)
        ref = np.hypot(h2_norm_lti(fl.with_feedthrough(np.zeros_like(fl.D))), h2_norm_ltiqo(fom))
        d = float(np.hypot(rows[0][1], rows[1][1]))
        rows.append(("extended", d, d / ref))
    for name, a, r in rows:
        print(f"{name}: abs={a:.10e} rel={r:.10e}")
    return EXIT_OK


def sweep(fom, orders, methods, seed=0, cfg=None):
    """Reduce, energy-match and measure for every ``(r, method)``.

    Returns a list of CSV records; ``h2_ham_*`` refer to the energy-matched
    ROM and ``h2_ham_*_pre`` to the reducer's own Hamiltonian.
    """
    rows = []
    ham_norm = h2_norm_ltiqo(fom)
    for method in methods:
        for r in orders:
            t0 = time.perf_counter()
            if method == "prbt":
                res = prbt(fom, r)
            elif method == "phirka":
                res = phirka(fom, r, seed=seed)
            else:
                raise UsageError(f"unknown method {method!r}")
            io_abs, io_rel = _io_errors(fom, res.rom_ph)
            pre_abs = h2_dist_ltiqo(fom, res.rom_ph)
            em = energy_match(fom, res.rom_ph, cfg)
            post_abs = float(np.sqrt(max(em.cost, 0.0)))
            rows.append(dict(
                r=r, h2_io_abs=io_abs, h2_io_rel=io_rel,
                h2_ham_abs=post_abs, h2_ham_rel=post_abs / ham_norm,
                wall_time_s=time.perf_counter() - t0, method=method,
                h2_ham_abs_pre=pre_abs, h2_ham_rel_pre=pre_abs / ham_norm,
            ))
    return rows


def cmd_sweep(args):
    t0 = time.perf_counter()
    fom = _require_ph(read_system(args.fom), "FOM")
    orders = _parse_ints(args.orders)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("prbt", "phirka"):
            raise UsageError(f"unknown method {m!r}")
    if not orders or min(orders) < 1 or max(orders) > fom.n:
        raise UsageError(f"orders must lie in [1, {fom.n}]")
    rows = sweep(fom, orders, methods, seed=args.seed)
    write_results_csv(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")
    _manifest(args, args.output, t0, fom=args.fom, output=args.output, orders=orders,
              methods=methods, seed=args.seed)
    return EXIT_OK


def cmd_gen(args):
    t0 = time.perf_counter()
    if args.family == "msd":
        sysobj = gen_msd(args.n_masses, args.m, args.mass, args.spring, args.damping)
        params = dict(n_masses=args.n_masses, m=args.m, mass=args.mass, spring=args.spring,
                      damping=args.damping)
    elif args.family == "rcl":
        sysobj = gen_rcl(args.n_cells, args.R_val, args.C_val, args.L_val, args.R_load)
        params = dict(n_cells=args.n_cells, R_val=args.R_val, C_val=args.C_val,
                      L_val=args.L_val, R_load=args.R_load)
    else:
        sysobj = gen_paper_example(args.which)
        params = dict(which=args.which)
    write_system(sysobj, args.output, comment=f"generated by phmor gen {args.family}")
    print(f"wrote {args.family} system (n={sysobj.n}, m={sysobj.m}) to {args.output}")
    _manifest(args, args.output, t0, family=args.family, output=args.output, **params)
    return EXIT_OK


def _input_preset(name, m):
    if name == "zero":
        return lambda t: np.zeros(m)
    if name == "step":
        return lambda t: np.ones(m)
    if name == "sincos":
        return lambda t: np.array([np.sin(t) if i % 2 == 0 else np.cos(t) for i in range(m)])
    raise UsageError(f"unknown input preset {name!r}")


def cmd_simulate(args):
    t0 = time.perf_counter()
    sysobj = read_system(args.path)
    if isinstance(sysobj, LtiSystem):
        X = extremal_solutions(sysobj)[0].X
        sysobj = ExtendedPhSystem(lti_to_ph(sysobj, X))
    if args.dt <= 0 or args.tf <= 0:
        raise UsageError("--dt and --tf must be positive")
    traj = simulate(sysobj, _input_preset(args.input, sysobj.m), dt=args.dt, t_final=args.tf)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y{i + 1}" for i in range(sysobj.m)] + ["y_H"])
        for k in range(traj.t.size):
            w.writerow([repr(float(traj.t[k]))] + [repr(float(v)) for v in traj.y[k]]
                       + [repr(float(traj.y_H[k]))])
    print(f"wrote {traj.t.size} samples to {args.output}")
    _manifest(args, args.output, t0, input=args.path, output=args.output, preset=args.input,
              dt=args.dt, tf=args.tf)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(
        prog="phmor",
        description="Structure-preserving model reduction and energy matching for "
                    "port-Hamiltonian systems.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check the pH structure of a PHMX1 file")
    s.add_argument("path")
    s.add_argument("--tol", type=float, default=1e-8, help="relative tolerance (default 1e-8)")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("minreal", help="structure-preserving minimal realization")
    s.add_argument("path")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL,
                   help=f"relative rank tolerance (default {DEFAULT_TOL:g})")
    s.set_defaults(func=cmd_minreal)

    s = sub.add_parser("reduce", help="reduce with PRBT or pH-IRKA")
    s.add_argument("path")
    s.add_argument("-r", "--order", type=int, required=True)
    s.add_argument("--method", choices=("prbt", "phirka"), default="prbt")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--shift-tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("energy-match", help="optimize the Hamiltonian of a ROM")
    s.add_argument("fom")
    s.add_argument("rom")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--alpha-schedule", default=None,
                   help="comma-separated, strictly decreasing barrier weights")
    s.add_argument("--sdp-export", default=None, metavar="PATH",
                   help="also write the problem in EMSDP1 format")
    s.set_defaults(func=cmd_energy_match)

    s = sub.add_parser("h2", help="H2 errors between two systems")
    s.add_argument("fom")
    s.add_argument("rom")
    s.add_argument("--which", choices=("io", "ham", "extended"), default="extended")
    s.set_defaults(func=cmd_h2)

    s = sub.add_parser("sweep", help="reduce + energy-match over several orders, write CSV")
    s.add_argument("fom")
    s.add_argument("--orders", required=True, help="comma-separated orders, e.g. 2,4,6")
    s.add_argument("--methods", default="prbt,phirka")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gen", help="generate a benchmark system")
    s.add_argument("family", choices=("msd", "rcl", "paper-example"))
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--n-masses", type=int, default=50)
    s.add_argument("-m", type=int, default=2, help="number of inputs (msd)")
    s.add_argument("--mass", type=float, default=4.0)
    s.add_argument("--spring", type=float, default=4.0)
    s.add_argument("--damping", type=float, default=1.0)
    s.add_argument("--n-cells", type=int, default=100)
    s.add_argument("--R-val", type=float, default=1.0)
    s.add_argument("--C-val", type=float, default=1.0)
    s.add_argument("--L-val", type=float, default=1.0)
    s.add_argument("--R-load", type=float, default=None)
    s.add_argument("--which", choices=("ex4_1", "ex5_1", "ex5_5", "ex5_6"), default="ex5_1")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="implicit-midpoint simulation, write trajectory CSV")
    s.add_argument("path")
    s.add_argument("--input", choices=("zero", "step", "sincos"), default="sincos")
    s.add_argument("--tf", type=float, default=10.0)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhmorError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
