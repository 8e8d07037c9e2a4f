"""Benchmark generators, the plain-text system file format and CSV output.

File format
-----------
Two versioned, line-oriented text formats are supported.  ``#`` starts a
comment, blank lines are ignored and numbers are written with 17
significant digits (``%.17g``) so that a write/read round trip is exact::

    PHMX1 n m          LTIX1 n m p
    J                  A
    <n rows of n>      <n rows of n>
    R                  B
    ...                <n rows of m>
                       C
                       <p rows of n>
                       D
                       <p rows of m>

A ``PHMX1`` file holds the blocks ``J R Q G P S N`` (``J, R, Q``: ``n x n``;
``G, P``: ``n x m``; ``S, N``: ``m x m``) in any order; ``P``, ``S`` and
``N`` may be omitted and default to zero.  An ``LTIX1`` file holds
``A B C D``; all four are required.
"""
from __future__ import annotations

import csv
import os

import numpy as np

from .errors import IoError, ParseError
from .systems import ExtendedPhSystem, LtiSystem, PhSystem

__all__ = [
    "gen_msd",
    "gen_rcl",
    "gen_paper_example",
    "paper_example_rom",
    "read_system",
    "write_system",
    "format_system",
    "parse_system",
    "write_results_csv",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = ("r", "h2_io_abs", "h2_io_rel", "h2_ham_abs", "h2_ham_rel", "wall_time_s")

#: default mass-spring-damper parameters
MSD_DEFAULTS = dict(mass=4.0, spring=4.0, damping=1.0)


# ---------------------------------------------------------------------------
# generators


def _per_element(value, n, name):
    v = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy() if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float).ravel()
    if v.size != n:
        raise ValueError(f"{name} needs {n} entries, got {v.size}")
    if np.any(v <= 0):
        raise ValueError(f"{name} must be positive")
    return v


def gen_msd(n_masses, m=2, mass=MSD_DEFAULTS["mass"], spring=MSD_DEFAULTS["spring"],
            damping=MSD_DEFAULTS["damping"]):
    """Mass-spring-damper chain in pH form.

    Spring ``i < n-1`` couples masses ``i`` and ``i+1``, spring ``n-1`` ties
    the last mass to the wall, and damper ``i`` connects mass ``i`` to the
    ground.  Forces act on the first ``m`` masses and the outputs are their
    velocities.  With state ``x = (q, p)`` (displacements, momenta)::

        J = [[0, I], [-I, 0]],  R = diag(0, C_d),  Q = diag(K, M^{-1}),
        G = [0; E_m],  P = 0,  S = N = 0.

    Parameters
    ----------
    n_masses : int
    m : int
        Number of actuated masses, ``1 <= m <= n_masses``.
    mass, spring, damping : float or array_like
        Scalars or one value per mass/element.

    Examples
    --------
    >>> from phmor.systems import ph_to_lti
    >>> ph_to_lti(gen_msd(1, 1, 1.0, 1.0, 1.0)).A
    array([[ 0.,  1.],
           [-1., -1.]])
    """
    n = int(n_masses)
    if n < 1 or not 1 <= m <= n:
        raise ValueError("need n_masses >= 1 and 1 <= m <= n_masses")
    M = _per_element(mass, n, "mass")
    k = _per_element(spring, n, "spring")
    c = _per_element(damping, n, "damping")
    # stiffness: springs between neighbors plus the wall spring at the end
    K = np.diag(k.copy())
    K[np.arange(1, n), np.arange(1, n)] += k[:-1]
    K[np.arange(n - 1), np.arange(1, n)] = -k[:-1]
    K[np.arange(1, n), np.arange(n - 1)] = -k[:-1]
    Z = np.zeros((n, n))
    I = np.eye(n)
    J = np.block([[Z, I], [-I, Z]])
    R = np.block([[Z, Z], [Z, np.diag(c)]])
    Q = np.block([[K, Z], [Z, np.diag(1.0 / M)]])
    G = np.vstack([np.zeros((n, m)), np.eye(n, m)])
    return ExtendedPhSystem(PhSystem.from_blocks(J, R, Q, G))


def gen_rcl(n_cells, R_val=1.0, C_val=1.0, L_val=1.0, R_load=None):
    """SISO RCL ladder network driven by a voltage source.

    Each cell is a series inductor ``L`` with resistance ``R`` followed by a
    shunt capacitor ``C``; the last capacitor is loaded with ``R_load``
    (default ``R_val``).  States alternate ``(φ_1, q_1, φ_2, q_2, ...)``
    (inductor fluxes and capacitor charges), so ``n = 2 n_cells``.  The input
    is the source voltage and the output the current into the first cell.

    Long ladders are numerically far from minimal: the reachable subspace
    decays quickly along the chain.
    """
    k = int(n_cells)
    if k < 1:
        raise ValueError("n_cells must be >= 1")
    for name, v in (("R_val", R_val), ("C_val", C_val), ("L_val", L_val)):
        if v <= 0:
            raise ValueError(f"{name} must be positive")
    R_load = R_val if R_load is None else R_load
    if R_load <= 0:
        raise ValueError("R_load must be positive")
    n = 2 * k
    phi = np.arange(0, n, 2)
    q = np.arange(1, n, 2)
    J = np.zeros((n, n))
    J[phi, q] = -1.0
    J[q, phi] = 1.0
    J[q[:-1], phi[1:]] = -1.0
    J[phi[1:], q[:-1]] = 1.0
    R = np.zeros((n, n))
    R[phi, phi] = R_val
    R[q[-1], q[-1]] = 1.0 / R_load
    Q = np.zeros((n, n))
    Q[phi, phi] = 1.0 / L_val
    Q[q, q] = 1.0 / C_val
    G = np.zeros((n, 1))
    G[0, 0] = 1.0
    return ExtendedPhSystem(PhSystem.from_blocks(J, R, Q, G))


def gen_paper_example(which):
    """Small textbook systems used throughout the tests.

    ``"ex4_1"`` and ``"ex5_1"`` are pH systems (returned as
    :class:`ExtendedPhSystem`); ``"ex5_5"`` and ``"ex5_6"`` are positive-real
    balanced state-space systems (returned as :class:`LtiSystem`).
    """
    if which == "ex4_1":
        return ExtendedPhSystem(PhSystem.from_blocks(
            J=[[0.0, -1.0], [1.0, 0.0]], R=[[1.0, -1.0], [-1.0, 2.0]],
            Q=np.eye(2), G=[[1.0], [0.0]],
        ))
    if which == "ex5_1":
        return ExtendedPhSystem(PhSystem.from_blocks(
            J=[[0.0, 1.0], [-1.0, 0.0]], R=[[2.0, 0.0], [0.0, 1.0]],
            Q=np.eye(2), G=[[6.0], [0.0]], S=[[1.0]],
        ))
    if which == "ex5_5":
        return LtiSystem([[-2.0, -4.0], [-4.0, -9.0]], [[4.0], [4.0]], [[4.0, 4.0]], [[1.0]])
    if which == "ex5_6":
        return LtiSystem([[-1.0, -4.5], [-4.5, -27.0]], [[4.0], [4.0]], [[4.0, 4.0]],
                         [[1.0 / 3.0]])
    raise ValueError(f"unknown example {which!r}; expected ex4_1, ex5_1, ex5_5 or ex5_6")


def paper_example_rom(which):
    """The reduced model paired with a textbook example (``ex4_1`` or ``ex5_1``)."""
    if which == "ex4_1":
        return LtiSystem(-1.0, 1.0, 1.0, 0.0)
    if which == "ex5_1":
        return LtiSystem(-2.0, 6.0, 6.0, 1.0)
    raise ValueError(f"no reduced model stored for {which!r}")


# ---------------------------------------------------------------------------
# system files

_PH_BLOCKS = ("J", "R", "Q", "G", "P", "S", "N")
_LTI_BLOCKS = ("A", "B", "C", "D")


def _block_shapes(tag, dims):
    if tag == "PHMX1":
        n, m = dims
        return {"J": (n, n), "R": (n, n), "Q": (n, n), "G": (n, m), "P": (n, m),
                "S": (m, m), "N": (m, m)}
    n, m, p = dims
    return {"A": (n, n), "B": (n, m), "C": (p, n), "D": (p, m)}


def _fmt_row(row):
    return " ".join("%.17g" % v for v in row)


def format_system(sys, comment=None):
    """Serialize a system to the PHMX1 (pH) or LTIX1 (state-space) text format."""
    lines = []
    if comment:
        lines.extend("# " + c for c in str(comment).splitlines())
    if isinstance(sys, (ExtendedPhSystem, PhSystem)):
        ph = sys.ph if isinstance(sys, ExtendedPhSystem) else sys
        lines.append(f"PHMX1 {ph.n} {ph.m}")
        blocks = [(name, getattr(ph, name)) for name in _PH_BLOCKS]
    elif isinstance(sys, LtiSystem):
        lines.append(f"LTIX1 {sys.n} {sys.m} {sys.p}")
        blocks = [(name, getattr(sys, name)) for name in _LTI_BLOCKS]
    else:
        raise TypeError(f"cannot serialize {type(sys).__name__}")
    for name, M in blocks:
        lines.append(name)
        lines.extend(_fmt_row(r) for r in np.atleast_2d(M))
    return "\n".join(lines) + "\n"


def write_system(sys, path, comment=None):
    """Write ``sys`` to ``path`` (see the module docstring for the format)."""
    with open(path, "w") as fh:
        fh.write(format_system(sys, comment))


def _tokens(text):
    """Yield ``(line_no, column, fields)`` for all non-blank, non-comment lines."""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        yield i, col, line


def _parse_numbers(line, lineno, ncols):
    vals = []
    pos = 0
    for tok in line.split():
        start = line.index(tok, pos)
        pos = start + len(tok)
        try:
            vals.append(float(tok))
        except ValueError:
            raise ParseError(f"not a number: {tok!r}", lineno, start + 1) from None
    if len(vals) != ncols:
        raise ParseError(f"expected {ncols} numbers, found {len(vals)}", lineno, 1)
    return vals


def parse_system(text):
    """Parse PHMX1/LTIX1 text into an :class:`ExtendedPhSystem` or :class:`LtiSystem`."""
    lines = list(_tokens(text))
    if not lines:
        raise ParseError("empty file: missing header", 1, 1)
    lineno, col, header = lines[0]
    fields = header.split()
    tag = fields[0]
    if tag not in ("PHMX1", "LTIX1"):
        raise ParseError(f"unknown format tag {tag!r} (expected PHMX1 or LTIX1)", lineno, col)
    ndims = 2 if tag == "PHMX1" else 3
    if len(fields) != 1 + ndims:
        raise ParseError(f"{tag} header needs {ndims} dimensions", lineno, col)
    try:
        dims = tuple(int(f) for f in fields[1:])
    except ValueError:
        raise ParseError("dimensions must be integers", lineno, col) from None
    if any(d < 1 for d in dims):
        raise ParseError("dimensions must be positive", lineno, col)
    shapes = _block_shapes(tag, dims)

    blocks = {}
    k = 1
    while k < len(lines):
        lineno, col, line = lines[k]
        name = line.strip()
        if name not in shapes:
            raise ParseError(f"expected a block name ({', '.join(shapes)}), got {name!r}",
                             lineno, col)
        if name in blocks:
            raise ParseError(f"block {name} appears twice", lineno, col)
        rows, cols = shapes[name]
        data = []
        for _ in range(rows):
            k += 1
            if k >= len(lines):
                raise ParseError(f"unexpected end of file inside block {name}",
                                 lineno + len(data) + 1, 1)
            ln, _, rowtxt = lines[k]
            data.append(_parse_numbers(rowtxt, ln, cols))
        blocks[name] = np.array(data, dtype=float).reshape(rows, cols)
        k += 1

    required = ("J", "R", "Q", "G") if tag == "PHMX1" else _LTI_BLOCKS
    missing = [b for b in required if b not in blocks]
    if missing:
        last = lines[-1][0] if lines else 1
        raise ParseError(f"missing block(s): {', '.join(missing)}", last, 1)
    if tag == "LTIX1":
        return LtiSystem(*(blocks[b] for b in _LTI_BLOCKS))
    return ExtendedPhSystem(PhSystem.from_blocks(**blocks))


def read_system(path):
    """Read a PHMX1 or LTIX1 file.

    Raises
    ------
    ParseError
        Malformed content, with line and column of the problem.
    OSError
        The file cannot be opened.
    """
    with open(path) as fh:
        text = fh.read()
    return parse_system(text)


# ---------------------------------------------------------------------------
# CSV results


def write_results_csv(rows, path, columns=RESULT_COLUMNS):
    """Write result records as CSV.

    Parameters
    ----------
    rows : iterable of dict
    path : str or path-like
    columns : sequence of str
        Column order; keys of a record that are not listed are appended in
        order of first appearance (e.g. ``method`` for sweeps).

    Raises
    ------
    IoError
    """
    rows = list(rows)
    cols = list(columns)
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, restval="", lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for k, v in row.items()})
    except OSError as exc:
        raise IoError(f"cannot write {os.fspath(path)}: {exc}") from exc
