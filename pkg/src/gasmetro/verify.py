"""Invariant checks run by ``gasmetro verify``.

Each check returns ``(passed, value)``; ``run_all`` groups them by module
and produces a JSON-serialisable summary.
"""

import math

import numpy as np

from . import qcore
from .estimation import GridSpec, posterior_moments, uniform_prior
from .measurement import (
    check_povm,
    born_probabilities,
    povm_aamcm,
    povm_bell,
    povm_mem,
    povm_mub_like,
)
from .metrology import (
    fim,
    fubini_study_weight,
    hcrb,
    hcrb_closed_form,
    qfim,
    scalar_qcrb,
    sld,
    uhlmann,
    weak_commutativity_holds,
    weighted_inverse_trace,
)
from .models import (
    ALL_KINDS,
    DECLARED_OPERATORS,
    SINGLE_QUBIT_OPERATORS,
    ModelKind,
    ParamPoint,
    build_model,
    check_gas,
)

OPTIMAL_PAIRS = (("mcm", povm_bell), ("aamcm", povm_aamcm), ("mem", povm_mem))


def interior_grid(n: int, lo: float = 0.25, hi: float = 2.9, phi_lo: float = 0.2, phi_hi: float = 6.0):
    """n x n grid avoiding theta = pi/2 and phi multiples of pi/2, where optimal-POVM outcomes vanish."""
    return [ParamPoint(t, p) for t in np.linspace(lo, hi, n) for p in np.linspace(phi_lo, phi_hi, n)]


def _random_points(k: int, seed: int = 11):
    rng = np.random.default_rng(seed)
    return [ParamPoint(rng.uniform(0.2, math.pi - 0.2), rng.uniform(0.1, 2 * math.pi - 0.1)) for _ in range(k)]


def _random_density(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


# --- qcore -------------------------------------------------------------------

def check_eig_reconstruction():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 9))
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = x + x.conj().T
        w, v = qcore.herm_eig(h)
        worst = max(worst, float(np.max(np.abs(h - v @ np.diag(w) @ v.conj().T))))
    return worst < 1e-9, worst


def check_partial_trace_product():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        a, b = _random_density(rng, 2), _random_density(rng, 2)
        ab = qcore.kron(a, b)
        worst = max(worst, float(np.max(np.abs(qcore.partial_trace(ab, (2, 2), 0) - a))),
                    float(np.max(np.abs(qcore.partial_trace(ab, (2, 2), 1) - b))))
    return worst < 1e-12, worst


# --- models ------------------------------------------------------------------

def check_normalization():
    worst = 0.0
    for kind in ALL_KINDS:
        model = build_model(kind)
        for lam in interior_grid(9, 0.0, math.pi, 0.0, 2 * math.pi):
            worst = max(worst, abs(np.linalg.norm(model.state(lam)) - 1.0))
    return worst < 1e-12, worst


def check_gas_declared():
    devs = {k.value: check_gas(build_model(k), interior_grid(9, 0.0, math.pi, 0.0, 2 * math.pi)).max_deviation
            for k in DECLARED_OPERATORS}
    return all(d < 1e-10 for d in devs.values()), devs


def check_gas_negative_controls():
    grid = interior_grid(9, 0.1, math.pi - 0.1, 0.1, 2 * math.pi - 0.1)
    sq, par = build_model("single_qubit"), build_model("parallel")
    devs = {f"single_qubit/{op.label}": check_gas(sq, grid, operator=op).max_deviation for op in SINGLE_QUBIT_OPERATORS}
    devs.update({f"parallel/{op.label}": check_gas(par, grid, operator=op).max_deviation for op in DECLARED_OPERATORS.values()})
    return all(d > 1e-3 for d in devs.values()), devs


def check_derivatives():
    worst = 0.0
    for kind in ALL_KINDS:
        model = build_model(kind)
        for lam in _random_points(10):
            for i in (0, 1):
                diff = model.derivative(lam, i) - model.derivative(lam, i, method="central-fd")
                worst = max(worst, float(np.max(np.abs(diff))))
    return worst < 1e-8, worst


# --- metrology ---------------------------------------------------------------

def _expected_qfim(kind, t):
    s2 = math.sin(t) ** 2
    return {
        ModelKind.SINGLE_QUBIT: np.diag([1.0, s2]),
        ModelKind.PARALLEL: np.diag([2.0, 2 * s2]),
        ModelKind.MCM: np.diag([2.0, 2 * s2]),
        ModelKind.AAMCM: np.diag([1.0, 2 - 2 * math.cos(t)]),
        ModelKind.MEM: np.diag([1.0, 2 - 2 * math.cos(t)]),
    }[kind]


def check_qfim_closed_forms():
    worst = 0.0
    for kind in ALL_KINDS:
        model = build_model(kind)
        for lam in interior_grid(9):
            worst = max(worst, float(np.max(np.abs(qfim(model, lam) - _expected_qfim(kind, lam.theta)))))
    return worst < 1e-8, worst


def check_weak_commutativity():
    vals = {}
    for kind in ("mcm", "aamcm", "mem"):
        model = build_model(kind)
        vals[kind] = max(float(np.max(np.abs(uhlmann(model, lam)))) for lam in interior_grid(9))
    sq = build_model("single_qubit")
    vals["single_qubit_oracle_gap"] = max(
        abs(uhlmann(sq, lam)[0, 1] + math.sin(lam.theta) / 2) for lam in interior_grid(9)
    )
    ok = all(vals[k] < 1e-8 for k in ("mcm", "aamcm", "mem")) and vals["single_qubit_oracle_gap"] < 1e-6
    ok = ok and not weak_commutativity_holds(sq, (math.pi / 2, 0.3))
    return ok, vals


def check_sld_pure():
    worst = 0.0
    for kind in ALL_KINDS:
        model = build_model(kind)
        for lam in _random_points(5):
            rho = model.density(lam)
            for i in (0, 1):
                dr = model.derivative(lam, i)
                worst = max(worst, float(np.max(np.abs(sld(rho, dr) - 2 * dr))))
    return worst < 1e-9, worst


def check_hcrb_values():
    expected = {"single_qubit": 4.0, "parallel": 2.0, "mcm": 1.0}
    worst, worst_cf = 0.0, 0.0
    for kind, target in expected.items():
        model = build_model(kind)
        for lam in _random_points(5, seed=5):
            w = fubini_study_weight(lam)
            h = hcrb(model, lam, w)
            worst = max(worst, abs(h - target))
            worst_cf = max(worst_cf, abs(h - hcrb_closed_form(qfim(model, lam), uhlmann(model, lam), w)))
    return worst < 1e-3 and worst_cf < 1e-4, {"reference_gap": worst, "closed_form_gap": worst_cf}


def check_hcrb_vs_qcrb():
    """HCRB = QCRB under weak commutativity; HCRB = 2 QCRB for a single qubit."""
    worst_eq, worst_double = 0.0, 0.0
    for lam in _random_points(5, seed=6):
        w = fubini_study_weight(lam)
        for kind in ("mcm", "aamcm", "mem"):
            model = build_model(kind)
            worst_eq = max(worst_eq, abs(hcrb(model, lam, w) - scalar_qcrb(qfim(model, lam), w)))
        sq = build_model("single_qubit")
        worst_double = max(worst_double, abs(hcrb(sq, lam, w) - 2 * scalar_qcrb(qfim(sq, lam), w)))
    return worst_eq < 1e-4 and worst_double < 1e-4, {"equal_gap": worst_eq, "double_gap": worst_double}


def check_bound_chain():
    pairs = [(k, p) for k, p in OPTIMAL_PAIRS] + [("single_qubit", povm_mub_like)]
    worst = -math.inf
    for kind, povm_fn in pairs:
        model, povm = build_model(kind), povm_fn()
        for lam in interior_grid(3):
            w = fubini_study_weight(lam)
            f = weighted_inverse_trace(fim(model, povm, lam), w)
            h = hcrb(model, lam, w)
            q = scalar_qcrb(qfim(model, lam), w)
            worst = max(worst, h - f, q - h)
    return worst < 1e-6, worst


def check_qfim_additivity():
    worst = 0.0
    sq = build_model("single_qubit")
    for kind in ("parallel", "mcm"):
        model = build_model(kind)
        for lam in interior_grid(5):
            worst = max(worst, float(np.max(np.abs(qfim(model, lam) - 2 * qfim(sq, lam)))))
    return worst < 1e-8, worst


# --- measurement -------------------------------------------------------------

def check_povm_validity():
    for fn in (povm_bell, povm_aamcm, povm_mem, povm_mub_like):
        check_povm(fn())
    return True, 4


def check_fim_equals_qfim():
    vals = {}
    for kind, povm_fn in OPTIMAL_PAIRS:
        model, povm = build_model(kind), povm_fn()
        vals[kind] = max(float(np.max(np.abs(fim(model, povm, lam) - qfim(model, lam)))) for lam in interior_grid(5))
    return all(v < 1e-8 for v in vals.values()), vals


def check_phi_plus_half():
    model, bell = build_model("mcm"), povm_bell()
    worst = max(abs(born_probabilities(model.state(lam), bell)[0] - 0.5) for lam in _random_points(50, seed=9))
    return worst < 1e-12, worst


# --- estimation --------------------------------------------------------------

def check_uniform_prior_moments():
    mean, cov = posterior_moments(uniform_prior(GridSpec()))
    var = (math.pi / 2) ** 2 / 12
    err = max(abs(mean[0] - math.pi / 4), abs(mean[1] - math.pi / 4), abs(cov[0, 0] - var),
              abs(cov[1, 1] - var), abs(cov[0, 1]))
    return err < 1e-4, err


SECTIONS = {
    "qcore": (check_eig_reconstruction, check_partial_trace_product),
    "models": (check_normalization, check_gas_declared, check_gas_negative_controls, check_derivatives),
    "metrology": (check_qfim_closed_forms, check_weak_commutativity, check_sld_pure, check_qfim_additivity,
                  check_hcrb_values, check_hcrb_vs_qcrb, check_bound_chain),
    "measurement": (check_povm_validity, check_fim_equals_qfim, check_phi_plus_half),
    "estimation": (check_uniform_prior_moments,),
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int, bool)):
        return x if isinstance(x, bool) else int(x)
    return str(x)


def run_all() -> dict:
    summary = {"passed": True, "sections": {}}
    for section, checks in SECTIONS.items():
        results = []
        for check in checks:
            try:
                ok, value = check()
            except Exception as exc:  # a crashing check is a failed check
                ok, value = False, f"{type(exc).__name__}: {exc}"
            results.append({
                "check": check.__name__.removeprefix("check_"),
                "passed": bool(ok),
                "value": _jsonable(value),
            })
            summary["passed"] &= bool(ok)
        summary["sections"][section] = results
    return summary
