"""Bounds tables and Monte-Carlo sweeps behind the command-line harness."""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .config import RunConfig
from .estimation import GridSpec, run_trials, weighted_mse
from .measurement import (
    Povm,
    povm_aamcm,
    povm_bell,
    povm_mem,
    povm_mub_like,
    povm_product,
)
from .metrology import (
    SingularQfimError,
    fim,
    fubini_study_weight,
    hcrb,
    qfim,
    uhlmann,
    weighted_inverse_trace,
)
from .models import ParamPoint, StatisticalModel, build_model

SCHEMA_VERSION = 1

FIG3_PIPELINES = (("mcm", "bell"), ("parallel", "mub"))
FIG4_PIPELINES = (("aamcm", "aamcm"), ("mem", "mem"))


def make_povm(label: str, dim: int, mub_weights=None) -> Povm:
    """Resolve a POVM label for a model of dimension ``dim``.

    ``mub`` and ``computational`` act qubit-wise, so on two-qubit models they
    become the product of the single-qubit measurement on each copy.
    """
    fixed = {"bell": povm_bell, "aamcm": povm_aamcm, "mem": povm_mem}
    if label in fixed:
        povm = fixed[label]()
    elif label in ("mub", "computational"):
        single = povm_mub_like(mub_weights) if label == "mub" else povm_mub_like({"z": 1.0})
        if label == "computational":
            single = Povm("computational", single.elements, single.names)
        povm = single if dim == 2 else povm_product(single, single)
    else:
        raise ValueError(f"unknown POVM label {label!r}")
    if povm.dim != dim:
        raise ValueError(f"POVM {label!r} acts on dimension {povm.dim}, model has dimension {dim}")
    return povm


def weight_matrix(choice: str, lam) -> np.ndarray:
    if choice == "fubini-study":
        return fubini_study_weight(lam)
    if choice == "identity":
        return np.eye(2)
    raise ValueError(f"unknown weight choice {choice!r}")


def _safe(fn, *args) -> float:
    try:
        return float(fn(*args))
    except SingularQfimError:
        return math.inf


def theory_columns(model: StatisticalModel, povm: Povm, lam, w) -> dict:
    """Per-probe bounds Tr(WQ^-1), HCRB and Tr(WF^-1)."""
    q = qfim(model, lam)
    return {
        "tr_wqinv": _safe(weighted_inverse_trace, q, w),
        "hcrb": _safe(hcrb, model, lam, w),
        "tr_wfinv": _safe(weighted_inverse_trace, fim(model, povm, lam), w),
    }


@dataclass(frozen=True)
class ResultRow:
    schema_version: int
    model: str
    povm: str
    theta: float
    phi: float
    m: int
    n_probes: int
    qubits_per_probe: int
    n_trials: int
    seed: int
    tr_wqinv: float
    hcrb: float
    tr_wfinv: float
    m_tr_wv: float
    m_tr_wv_se: float
    probe_tr_wv: float
    probe_tr_wv_se: float
    error: str = ""


COLUMNS = tuple(ResultRow.__dataclass_fields__)


@dataclass(frozen=True)
class _Job:
    row_index: int
    model: str
    povm: str
    theta: float
    phi: float
    cfg: RunConfig


def _run_job(job: _Job) -> ResultRow:
    cfg = job.cfg
    model = build_model(job.model)
    povm = make_povm(job.povm, model.dim, cfg.mub_weights)
    lam = ParamPoint(job.theta, job.phi)
    w = weight_matrix(cfg.weight, lam)
    base = dict(
        schema_version=SCHEMA_VERSION, model=model.name, povm=povm.label, theta=lam.theta, phi=lam.phi,
        m=cfg.m, qubits_per_probe=model.n_qubits, n_trials=cfg.n_trials, seed=cfg.seed,
    )
    nan = math.nan
    try:
        theory = theory_columns(model, povm, lam, w)
        grid = GridSpec(cfg.grid, cfg.grid, tuple(cfg.theta_range), tuple(cfg.phi_range))
        mse = run_trials(model, povm, lam, cfg.m, cfg.n_trials, cfg.seed, grid, job.row_index, cfg.estimator)
    except (ValueError, ArithmeticError) as exc:
        return ResultRow(n_probes=0, tr_wqinv=nan, hcrb=nan, tr_wfinv=nan, m_tr_wv=nan, m_tr_wv_se=nan,
                         probe_tr_wv=nan, probe_tr_wv_se=nan, error=f"{type(exc).__name__}: {exc}", **base)
    tr_wv = weighted_mse(mse, w)
    se = mse.standard_error(w)
    return ResultRow(
        n_probes=mse.n_probes,
        m_tr_wv=cfg.m * tr_wv,
        m_tr_wv_se=cfg.m * se,
        probe_tr_wv=mse.n_probes * tr_wv,
        probe_tr_wv_se=mse.n_probes * se,
        **theory,
        **base,
    )


def run_pipelines(cfg: RunConfig, pipelines) -> list[ResultRow]:
    """Rows ordered by pipeline, then lambda; stream keys follow the same order."""
    jobs = []
    for model, povm in pipelines:
        for theta, phi in cfg.lambda_points():
            jobs.append(_Job(len(jobs), model, povm, theta, phi, cfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def sweep_fig3(cfg: RunConfig) -> list[ResultRow]:
    return run_pipelines(cfg, FIG3_PIPELINES)


def sweep_fig4(cfg: RunConfig) -> list[ResultRow]:
    return run_pipelines(cfg, FIG4_PIPELINES)


def simulate(cfg: RunConfig) -> list[ResultRow]:
    return run_pipelines(cfg, [(cfg.model, cfg.povm)])


def bounds_rows(cfg: RunConfig) -> list[dict]:
    model = build_model(cfg.model)
    povm = make_povm(cfg.povm, model.dim, cfg.mub_weights)
    rows = []
    for theta, phi in cfg.lambda_points():
        lam = ParamPoint(theta, phi)
        row = {"schema_version": SCHEMA_VERSION, "model": model.name, "povm": povm.label, "theta": theta, "phi": phi}
        try:
            w = weight_matrix(cfg.weight, lam)
            q, u, f = qfim(model, lam), uhlmann(model, lam), fim(model, povm, lam)
            row.update(
                qfim=q.tolist(), uhlmann=u.tolist(), fim=f.tolist(),
                scalar_qcrb=weighted_inverse_trace(q, w),
                hcrb=hcrb(model, lam, w),
                tr_wfinv=_safe(weighted_inverse_trace, f, w),
                error="",
            )
        except SingularQfimError as exc:
            row.update(qfim=None, uhlmann=None, fim=None, scalar_qcrb=None, hcrb=None, tr_wfinv=None,
                       error=f"singular: {exc}")
        rows.append(row)
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return x


def rows_to_json(rows) -> str:
    payload = [asdict(r) if isinstance(r, ResultRow) else r for r in rows]
    return json.dumps(_json_safe({"schema_version": SCHEMA_VERSION, "rows": payload}), indent=2, sort_keys=True) + "\n"


def ordering_violations(row: ResultRow, slack_se: float = 3.0) -> list[str]:
    """Checks probe_tr_wv >= Tr(WF^-1) >= HCRB >= Tr(WQ^-1), with Monte-Carlo slack only on the first."""
    out = []
    tol = 1e-6
    if row.tr_wfinv < row.hcrb - tol:
        out.append("Tr(WF^-1) < HCRB")
    if row.hcrb < row.tr_wqinv - tol:
        out.append("HCRB < Tr(WQ^-1)")
    if row.probe_tr_wv < row.tr_wfinv - slack_se * row.probe_tr_wv_se:
        out.append("N Tr(WV) < Tr(WF^-1) - 3 SE")
    return out
