import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phmor.errors import FeedthroughMismatch, NonzeroFeedthrough, Unstable
from phmor.gramians_norms import (
    cross_gramians,
    gramians,
    h2_dist_extended,
    h2_dist_lti,
    h2_dist_ltiqo,
    h2_norm_extended,
    h2_norm_lti,
    h2_norm_ltiqo,
    qo_obs_gramian,
)
from phmor.systems import ExtendedPhSystem, LtiqoSystem, LtiSystem, PhSystem, ph_to_lti

from factories import random_ph


def _ex51():
    return ExtendedPhSystem(PhSystem.from_blocks(
        J=[[0.0, 1.0], [-1.0, 0.0]], R=[[2.0, 0.0], [0.0, 1.0]],
        Q=np.eye(2), G=[[6.0], [0.0]], S=[[1.0]],
    ))


def test_scalar_gramians():
    g = gramians(LtiSystem(-2.0, 6.0, 6.0, 0.0))
    assert g.P_ctrl[0, 0] == pytest.approx(9.0)
    assert g.O_obs[0, 0] == pytest.approx(9.0)


def test_ex51_gramian_and_norm():
    ext = _ex51()
    g = gramians(ext.io.with_feedthrough([[0.0]]))
    np.testing.assert_allclose(g.P_ctrl, [[8.0, -2.0], [-2.0, 2.0]], atol=1e-12)
    assert h2_norm_ltiqo(ext) ** 2 == pytest.approx(19.0, abs=1e-12)


def test_qo_gramian_trace_identity():
    rng = np.random.default_rng(2)
    ext = random_ph(rng, 6, 2)
    O = qo_obs_gramian(ext)
    B = ext.ham.B
    assert np.trace(B.T @ O @ B) == pytest.approx(h2_norm_ltiqo(ext) ** 2, rel=1e-10)


def test_lti_norm_matches_observability_form():
    rng = np.random.default_rng(4)
    lti = ph_to_lti(random_ph(rng, 7, 3)).with_feedthrough(np.zeros((3, 3)))
    g = gramians(lti)
    n2 = np.trace(lti.B.T @ g.O_obs @ lti.B)
    assert h2_norm_lti(lti) ** 2 == pytest.approx(n2, rel=1e-10)


def test_ltiqo_scalar():
    # P = 1/2, ||Σ_H||^2 = 1/4 * (1/2 * 2)^2
    assert h2_norm_ltiqo(LtiqoSystem(-1.0, 1.0, 2.0)) == pytest.approx(0.5)


def test_nonzero_feedthrough_rejected():
    with pytest.raises(NonzeroFeedthrough):
        h2_norm_lti(LtiSystem(-1.0, 1.0, 1.0, 1.0))


def test_unstable_rejected():
    with pytest.raises(Unstable):
        h2_norm_lti(LtiSystem(1.0, 1.0, 1.0, 0.0))
    with pytest.raises(Unstable):
        h2_norm_ltiqo(LtiqoSystem(0.0, 1.0, 1.0))


def test_dist_feedthrough_mismatch():
    with pytest.raises(FeedthroughMismatch):
        h2_dist_lti(LtiSystem(-1.0, 1.0, 1.0, 1.0), LtiSystem(-2.0, 1.0, 1.0, 0.5))


def test_extended_norm_ignores_feedthrough():
    ext = _ex51()
    io = h2_norm_lti(ext.io.with_feedthrough([[0.0]]))
    assert h2_norm_extended(ext) == pytest.approx(np.hypot(io, np.sqrt(19.0)))


def test_ex41_hamiltonian_distance():
    fom = ExtendedPhSystem(PhSystem.from_blocks(
        J=[[0.0, -1.0], [1.0, 0.0]], R=[[1.0, -1.0], [-1.0, 2.0]], Q=np.eye(2),
        G=[[1.0], [0.0]],
    ))
    rom = LtiqoSystem(-1.0, 1.0, 1.0)
    assert h2_dist_ltiqo(fom, rom) == pytest.approx(1 / 6, abs=1e-10)


def test_cross_gramian_ex51():
    ext = _ex51()
    cg = cross_gramians(ext.io, LtiSystem(-2.0, 6.0, 6.0, 1.0))
    np.testing.assert_allclose(cg.Y, np.array([[108.0], [-36.0]]) / 13, atol=1e-12)
    assert cg.Z is not None


def test_distance_to_self_is_zero():
    rng = np.random.default_rng(9)
    ext = random_ph(rng, 6, 2, feedthrough=True)
    assert h2_dist_extended(ext, ext) < 1e-10 * h2_norm_extended(ext)


def test_factored_refinement_keeps_relative_accuracy():
    # ROM differs from the FOM by a perturbation of size 1e-9: the trace
    # formula loses all digits, the factored evaluation does not
    rng = np.random.default_rng(1)
    ext = random_ph(rng, 5, 1)
    lti = ext.io
    pert = LtiSystem(lti.A, lti.B, lti.C * (1 + 1e-9), lti.D)
    d_auto = h2_dist_lti(lti, pert)
    d_fact = h2_dist_lti(lti, pert, method="factored")
    expected = 1e-9 * h2_norm_lti(lti)
    assert d_fact == pytest.approx(expected, rel=1e-5)
    assert d_auto == pytest.approx(expected, rel=1e-5)


def test_singular_q_restricted_to_range():
    # an extra state in ker Q that is only marginally stable does not change the norms
    base = PhSystem.from_blocks(J=[[0.0, 1.0], [-1.0, 0.0]], R=[[2.0, 0.0], [0.0, 1.0]],
                                Q=np.eye(2), G=[[6.0], [0.0]])
    J = np.zeros((3, 3))
    J[:2, :2] = base.J
    R = np.zeros((3, 3))
    R[:2, :2] = base.R
    Q = np.diag([1.0, 1.0, 0.0])
    G = np.vstack([base.G, [[1.0]]])
    big = ExtendedPhSystem(PhSystem.from_blocks(J, R, Q, G))
    assert h2_norm_ltiqo(big) == pytest.approx(np.sqrt(19.0), rel=1e-12)
    assert h2_dist_extended(big, ExtendedPhSystem(base)) < 1e-6


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), r=st.integers(1, 4))
def test_trace_and_factored_agree(seed, n, r):
    rng = np.random.default_rng(seed)
    fom = random_ph(rng, n, 2)
    rom = random_ph(rng, r, 2)
    for method in ("trace", "factored"):
        d_io = h2_dist_lti(fom, rom, method=method)
        d_h = h2_dist_ltiqo(fom, rom, method=method)
        if method == "trace":
            ref_io, ref_h = d_io, d_h
    scale_io = h2_norm_lti(fom.io) + h2_norm_lti(rom.io)
    scale_h = h2_norm_ltiqo(fom) + h2_norm_ltiqo(rom)
    assert abs(d_io - ref_io) < 1e-6 * scale_io
    assert abs(d_h - ref_h) < 1e-6 * scale_h


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_triangle_inequality(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (random_ph(rng, n, 1) for _ in range(3))
    dab = h2_dist_ltiqo(a, b)
    dbc = h2_dist_ltiqo(b, c)
    dac = h2_dist_ltiqo(a, c)
    assert dac <= dab + dbc + 1e-8 * (dab + dbc + 1.0)
