import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space
from scipy.optimize import minimize

from gasmetro.measurement import Povm, povm_aamcm, povm_bell, povm_mem, povm_mub_like
from gasmetro.metrology import (
    InformationDivergenceWarning,
    SingularQfimError,
    bounds_report,
    check_weight,
    fim,
    fim_details,
    fubini_study_weight,
    hcrb,
    hcrb_closed_form,
    hcrb_details,
    hermitian_basis,
    holevo_functional,
    qfim,
    scalar_qcrb,
    sld,
    uhlmann,
    weak_commutativity_holds,
    weighted_inverse_trace,
)
from gasmetro.models import ALL_KINDS, build_model
from gasmetro.qcore import I2, SIGMA_Z, ket, projector

from .conftest import GRID_5, GRID_9

T, P = sp.symbols("theta phi", real=True)


def _sympy_fim(prob_exprs, theta, phi):
    """Classical Fisher matrix from closed-form outcome probabilities, differentiated symbolically."""
    f = np.zeros((2, 2))
    for p in prob_exprs:
        grads = [sp.diff(p, T), sp.diff(p, P)]
        pv = float(p.subs({T: theta, P: phi}))
        if pv < 1e-14:
            continue
        g = np.array([float(gi.subs({T: theta, P: phi})) for gi in grads])
        f += np.outer(g, g) / pv
    return f


# --- SLD ---------------------------------------------------------------------

def test_sld_pure_qubit_equator():
    sq = build_model("single_qubit")
    lam = (math.pi / 2, 0.0)
    np.testing.assert_allclose(sld(sq.density(lam), sq.derivative(lam, 0)), -SIGMA_Z, atol=1e-12)


def test_sld_full_rank_commuting():
    np.testing.assert_allclose(sld(I2 / 2, SIGMA_Z / 4), SIGMA_Z / 2, atol=1e-15)


def test_sld_zero_derivative():
    np.testing.assert_array_equal(sld(I2 / 2, np.zeros((2, 2))), np.zeros((2, 2)))


def test_sld_rejects_non_hermitian():
    with pytest.raises(ValueError):
        sld(I2 / 2, np.array([[0, 1], [0, 0]]))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_sld_equals_twice_derivative_for_pure_states(kind):
    m = build_model(kind)
    for lam in GRID_5:
        rho = m.density(lam)
        for i in (0, 1):
            dr = m.derivative(lam, i)
            l = sld(rho, dr)
            assert np.max(np.abs(l - 2 * dr)) < 1e-9
            assert np.max(np.abs(dr - 0.5 * (rho @ l + l @ rho))) < 1e-9


def test_sld_mixed_state_residual(rng):
    from .conftest import random_density

    rho = random_density(rng, 3)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    dr = x + x.conj().T
    dr -= np.trace(dr) / 3 * np.eye(3)
    l = sld(rho, dr)
    assert np.max(np.abs(dr - 0.5 * (rho @ l + l @ rho))) < 1e-9


# --- QFIm / Uhlmann ------------------------------------------------------------

@pytest.mark.parametrize("kind,expected", [
    ("single_qubit", lambda t: np.diag([1.0, math.sin(t) ** 2])),
    ("aamcm", lambda t: np.diag([1.0, 2 - 2 * math.cos(t)])),
    ("mcm", lambda t: np.diag([2.0, 2 * math.sin(t) ** 2])),
    ("parallel", lambda t: np.diag([2.0, 2 * math.sin(t) ** 2])),
    ("mem", lambda t: np.diag([1.0, 2 - 2 * math.cos(t)])),
])
def test_qfim_closed_forms(kind, expected):
    m = build_model(kind)
    for lam in GRID_9:
        assert np.max(np.abs(qfim(m, lam) - expected(lam[0]))) < 1e-8


def test_qfim_additivity():
    sq = build_model("single_qubit")
    for kind in ("parallel", "mcm"):
        m = build_model(kind)
        for lam in GRID_5:
            np.testing.assert_allclose(qfim(m, lam), 2 * qfim(sq, lam), atol=1e-8)


def test_single_qubit_uhlmann_matches_brute_force():
    sq = build_model("single_qubit")
    for theta, phi in GRID_9:
        rho = sq.density((theta, phi))
        lt, lp = (2 * sq.derivative((theta, phi), i) for i in (0, 1))
        comm = np.trace(rho @ (lt @ lp - lp @ lt))
        assert abs(comm - 2j * math.sin(theta)) < 1e-12
        u = uhlmann(sq, (theta, phi))
        assert abs(u[0, 1] + math.sin(theta) / 2) < 1e-12
        assert abs(u[0, 1] + u[1, 0]) < 1e-15


@pytest.mark.parametrize("kind", ["mcm", "aamcm", "mem"])
def test_uhlmann_vanishes_for_symmetric_models(kind):
    m = build_model(kind)
    for lam in GRID_9:
        assert np.max(np.abs(uhlmann(m, lam))) < 1e-10


def test_weak_commutativity():
    assert not weak_commutativity_holds(build_model("single_qubit"), (math.pi / 2, 0.7))
    assert weak_commutativity_holds(build_model("mcm"), (0.9, 0.7))
    assert weak_commutativity_holds(build_model("single_qubit"), (1e-10, 0.7), tol=1e-8)


# --- FIm -----------------------------------------------------------------------

MCM_BELL_PROBS = [
    sp.Rational(1, 2) + 0 * T,
    sp.cos(T) ** 2 / 2,
    sp.sin(T) ** 2 * sp.cos(P) ** 2 / 2,
    sp.sin(T) ** 2 * sp.sin(P) ** 2 / 2,
]
C, S = sp.cos(T / 2), sp.sin(T / 2)
AAMCM_PROBS = [C**2 / 2, C**2 / 2, S**2 * sp.cos(P) ** 2, S**2 * sp.sin(P) ** 2]


@pytest.mark.parametrize("theta,phi", [(1.0, 0.6), (0.4, 1.2), (2.3, 4.0)])
def test_fim_mcm_bell_symbolic_oracle(theta, phi):
    oracle = _sympy_fim(MCM_BELL_PROBS, theta, phi)
    np.testing.assert_allclose(oracle, np.diag([2, 2 * math.sin(theta) ** 2]), atol=1e-12)
    np.testing.assert_allclose(fim(build_model("mcm"), povm_bell(), (theta, phi)), oracle, atol=1e-10)


@pytest.mark.parametrize("kind,povm_fn", [("aamcm", povm_aamcm), ("mem", povm_mem)])
@pytest.mark.parametrize("theta,phi", [(1.0, 0.6), (2.5, 0.3)])
def test_fim_ancilla_models_symbolic_oracle(kind, povm_fn, theta, phi):
    oracle = _sympy_fim(AAMCM_PROBS, theta, phi)
    np.testing.assert_allclose(oracle, np.diag([1, 2 - 2 * math.cos(theta)]), atol=1e-12)
    np.testing.assert_allclose(fim(build_model(kind), povm_fn(), (theta, phi)), oracle, atol=1e-10)


def test_fim_computational_basis_single_qubit():
    z = Povm("z", (projector(ket("0")), projector(ket("1"))), ("0", "1"))
    np.testing.assert_allclose(fim(build_model("single_qubit"), z, (1.2, 0.4)), np.diag([1, 0]), atol=1e-12)


@pytest.mark.parametrize("kind,povm_fn", [("mcm", povm_bell), ("aamcm", povm_aamcm), ("mem", povm_mem)])
def test_optimal_povms_saturate_qfim(kind, povm_fn):
    m, povm = build_model(kind), povm_fn()
    for lam in GRID_5:
        assert np.max(np.abs(fim(m, povm, lam) - qfim(m, lam))) < 1e-8


@pytest.mark.parametrize("kind,povm_fn", [("mcm", povm_bell), ("single_qubit", povm_mub_like), ("aamcm", povm_aamcm)])
def test_fim_analytic_matches_finite_differences(kind, povm_fn):
    m, povm = build_model(kind), povm_fn()
    for lam in GRID_5[::3]:
        np.testing.assert_allclose(fim(m, povm, lam), fim(m, povm, lam, method="central-fd"), atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["single_qubit", "parallel", "mcm", "aamcm", "mem"]),
       st.floats(0.1, math.pi - 0.1), st.floats(0.05, 2 * math.pi - 0.05))
def test_fim_below_qfim(kind, theta, phi):
    from gasmetro.experiments import make_povm

    m = build_model(kind)
    for label in ("mub", "computational"):
        povm = make_povm(label, m.dim)
        gap = np.linalg.eigvalsh(qfim(m, (theta, phi)) - fim(m, povm, (theta, phi)))
        assert gap.min() > -1e-8


def test_fim_flags_divergent_outcome():
    # p(|1>) = sin^2(theta/2) with d/dtheta p = sin(theta)/2 != 0 ... only vanishes with p;
    # a POVM element with p = 0 but nonzero slope comes from a linear zero crossing.
    z = Povm("z", (projector(ket("0")), projector(ket("1"))), ("0", "1"))
    res = fim_details(build_model("single_qubit"), z, (0.0, 0.3))
    assert res.diverging_outcomes == []
    m = build_model("mcm")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fim(m, povm_bell(), (1.0, 0.0))


def test_fim_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        fim(build_model("single_qubit"), povm_bell(), (1.0, 1.0))


# --- scalar bounds ---------------------------------------------------------------

@pytest.mark.parametrize("theta", [0.3, 1.0, 2.0, 2.9])
def test_scalar_qcrb_values(theta):
    lam = (theta, 0.5)
    w = fubini_study_weight(lam)
    assert abs(scalar_qcrb(qfim(build_model("single_qubit"), lam), w) - 2) < 1e-10
    assert abs(scalar_qcrb(qfim(build_model("mcm"), lam), w) - 1) < 1e-10


def test_scalar_qcrb_aamcm_equator():
    lam = (math.pi / 2, 0.4)
    assert abs(scalar_qcrb(qfim(build_model("aamcm"), lam), fubini_study_weight(lam)) - 1.5) < 1e-10


def test_scalar_qcrb_singular():
    with pytest.raises(SingularQfimError):
        scalar_qcrb(np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(SingularQfimError):
        hcrb(build_model("single_qubit"), (0.0, 0.3))


def test_check_weight():
    with pytest.raises(ValueError):
        check_weight(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        check_weight(np.diag([1.0, -1.0]))


# --- HCRB ------------------------------------------------------------------------

@pytest.mark.parametrize("kind,value", [("single_qubit", 4.0), ("parallel", 2.0), ("mcm", 1.0)])
def test_hcrb_reported_values(kind, value):
    m = build_model(kind)
    rng = np.random.default_rng(17)
    for _ in range(5):
        lam = (rng.uniform(0.2, math.pi - 0.2), rng.uniform(0, 2 * math.pi))
        assert abs(hcrb(m, lam) - value) < 1e-6


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_hcrb_matches_closed_form_for_general_weights(kind):
    m = build_model(kind)
    rng = np.random.default_rng(3)
    for _ in range(4):
        lam = (rng.uniform(0.3, 2.8), rng.uniform(0.1, 6.0))
        a = rng.normal(size=(2, 2))
        w = a @ a.T + 0.1 * np.eye(2)
        res = hcrb_details(m, lam, w)
        assert res.gap < 1e-8
        assert abs(res.value - hcrb_closed_form(qfim(m, lam), uhlmann(m, lam), w)) < 1e-8


def test_hcrb_certificate_is_feasible():
    m = build_model("single_qubit")
    lam = (1.0, 0.5)
    res = hcrb_details(m, lam)
    rho = m.density(lam)
    for j, x in enumerate(res.observables):
        assert np.max(np.abs(x - x.conj().T)) < 1e-12
        assert abs(np.trace(rho @ x)) < 1e-9
        for i in range(2):
            assert abs(np.trace(m.derivative(lam, i) @ x) - (i == j)) < 1e-9
    assert abs(holevo_functional(rho, res.observables, fubini_study_weight(lam)) - res.value) < 1e-12


def test_hcrb_brute_force_primal_single_qubit():
    """Independent route: direct minimization of the Holevo functional on the constraint null space."""
    m = build_model("single_qubit")
    lam = (0.9, 1.3)
    rho, w = m.density(lam), fubini_study_weight(lam)
    basis = hermitian_basis(2)
    drs = [m.derivative(lam, i) for i in (0, 1)]
    rows, rhs = [], []
    for j in range(2):
        for op, val in [(rho, 0.0), (drs[0], float(j == 0)), (drs[1], float(j == 1))]:
            row = np.zeros(8)
            row[4 * j:4 * j + 4] = [np.trace(op @ b).real for b in basis]
            rows.append(row)
            rhs.append(val)
    a, b = np.array(rows), np.array(rhs)
    x0 = np.linalg.lstsq(a, b, rcond=None)[0]
    ns = null_space(a)

    def objective(y):
        x = x0 + ns @ y
        xs = [sum(c * bk for c, bk in zip(x[4 * j:4 * j + 4], basis)) for j in range(2)]
        return holevo_functional(rho, xs, w)

    best = min(
        minimize(objective, y0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000}).fun
        for y0 in np.random.default_rng(0).normal(size=(8, ns.shape[1]))
    )
    assert abs(best - 4.0) < 1e-6
    assert abs(hcrb(m, lam, w) - best) < 1e-6


def test_hcrb_equals_qcrb_under_weak_commutativity():
    for kind in ("mcm", "aamcm", "mem"):
        m = build_model(kind)
        for lam in GRID_5[::2]:
            w = fubini_study_weight(lam)
            assert abs(hcrb(m, lam, w) - scalar_qcrb(qfim(m, lam), w)) < 1e-4


def test_hcrb_maximal_discrepancy_single_qubit():
    m = build_model("single_qubit")
    for lam in GRID_5[::2]:
        w = fubini_study_weight(lam)
        assert abs(hcrb(m, lam, w) - 2 * scalar_qcrb(qfim(m, lam), w)) < 1e-4


@pytest.mark.parametrize("kind,povm_label", [
    ("single_qubit", "mub"), ("single_qubit", "computational"), ("parallel", "mub"),
    ("mcm", "bell"), ("aamcm", "aamcm"), ("mem", "mem"), ("mcm", "mub"),
])
def test_bound_chain(kind, povm_label):
    from gasmetro.experiments import make_povm

    m = build_model(kind)
    povm = make_povm(povm_label, m.dim)
    for lam in GRID_5[::2]:
        w = fubini_study_weight(lam)
        q = scalar_qcrb(qfim(m, lam), w)
        h = hcrb(m, lam, w)
        try:
            f = weighted_inverse_trace(fim(m, povm, lam), w)
        except SingularQfimError:
            f = math.inf
        assert f >= h - 1e-6
        assert h >= q - 1e-6


def test_bounds_report():
    rep = bounds_report(build_model("single_qubit"), (1.0, 0.5), [povm_mub_like()])
    assert abs(rep.scalar_qcrb - 2) < 1e-10 and abs(rep.hcrb - 4) < 1e-8
    assert rep.fim_bound_by_povm["mub"] >= rep.hcrb
    np.testing.assert_allclose(rep.uhlmann, -rep.uhlmann.T)
    assert np.linalg.eigvalsh(rep.qfim).min() >= 0
