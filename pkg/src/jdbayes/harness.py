"""Monte Carlo replication driver, summary tables and CSV reports."""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .contrast import FilterSpec, InvalidFilterError
from .model import ModelSpec, ParamBox, ParamVector, make_model, preset, \
    validate_assumptions
from .pipeline import estimate_full
from .sampler import MCMCConfig
from .simulator import SimConfig, filter_validity_diagnostic, simulate_path, \
    write_path_csv


class ConfigError(ValueError):
    """Invalid experiment configuration."""


ESTIMATORS = ("mu0_hat", "sigma_hat", "mu_hat", "alpha1_hat", "alpha2_hat")
# acceptance-rate column feeding each estimator's summary
_STAGE_OF = {"mu0_hat": 0, "sigma_hat": 1, "mu_hat": 2}


@dataclass
class ExperimentConfig:
    model: ModelSpec
    theta0: ParamVector
    cells: list
    lam: float
    replications: int = 200
    x0: float = 1.0
    substeps: int = 10
    seed: int = 0
    filter: FilterSpec = None
    mcmc: MCMCConfig = field(default_factory=MCMCConfig)
    psi_sentinel: str = "zero"
    diag_warn_level: float = 0.05
    raw: dict = field(default_factory=dict)

    @property
    def alpha_dim(self) -> int:
        return self.theta0.alpha.size

    def columns(self) -> list:
        cols = ["cell_id", "n", "epsilon", "lambda", "rep", "mu0_hat",
                "sigma_hat", "mu_hat"]
        cols += [f"alpha{i + 1}_hat" for i in range(self.alpha_dim)]
        cols += ["njumps_detected", "filter_diag"]
        cols += [f"acc_rate_stage{i}" for i in range(4)]
        cols += ["warn_code"]
        return cols


def _schema() -> dict:
    text = resources.files("jdbayes").joinpath("schema.json").read_text()
    return json.loads(text)


def _box(spec, dim) -> Optional[ParamBox]:
    if spec is None:
        return None
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1:
        return ParamBox.uniform(arr[0], arr[1], dim)
    if arr.shape[0] != dim:
        raise ConfigError(f"box has {arr.shape[0]} rows, expected {dim}")
    return ParamBox(arr[:, 0], arr[:, 1])


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document and build an ExperimentConfig."""
    validator = jsonschema.Draft7Validator(_schema())
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errs:
        msgs = []
        for e in errs:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))

    th = doc["theta0"]
    theta0 = ParamVector(th["sigma"], th["mu"], th["alpha"])
    m = doc["model"]
    if isinstance(m, str):
        model = preset(m)
    else:
        model = make_model(drift=m["drift"], family=m["family"],
                           q=m.get("q", 1.0))
    boxes = doc.get("boxes", {})
    model = model.with_boxes(
        sigma_box=_box(boxes.get("sigma"), theta0.sigma.size),
        mu_box=_box(boxes.get("mu"), theta0.mu.size),
        alpha_box=_box(boxes.get("alpha"), theta0.alpha.size))
    try:
        model.check_theta(theta0)
    except ValueError as exc:
        raise ConfigError(f"theta0: {exc}") from None

    f = doc.get("filter")
    if f is None:
        filt = FilterSpec.default_for(model)
    else:
        base = FilterSpec.default_for(model)
        filt = FilterSpec(kind=f.get("kind", base.kind),
                          rho=f.get("rho", base.rho), v=f.get("v", 1.0),
                          n_jumps=f.get("n_jumps"))
    for c in doc["cells"]:
        try:
            filt.validate(c["n"], model.family.q)
        except InvalidFilterError as exc:
            raise ConfigError(f"filter: {exc} (cell n={c['n']})") from None

    mc = doc.get("mcmc", {})
    try:
        mcmc = MCMCConfig(rho_mpcn=mc.get("rho", 0.8),
                          chain_len=mc.get("chain_len", 10_000),
                          burn_in=mc.get("burn_in", 525),
                          method=mc.get("method", "mpcn"),
                          norm_exponent=mc.get("norm_exponent"),
                          init=mc.get("init", "prior_draw"))
    except ValueError as exc:
        raise ConfigError(f"mcmc: {exc}") from None

    return ExperimentConfig(
        model=model, theta0=theta0,
        cells=[(int(c["n"]), float(c["epsilon"])) for c in doc["cells"]],
        lam=float(doc["lambda"]),
        replications=int(doc.get("replications", 200)),
        x0=float(doc.get("x0", 1.0)), substeps=int(doc.get("substeps", 10)),
        seed=int(doc.get("seed", 0)), filter=filt, mcmc=mcmc,
        psi_sentinel=doc.get("psi_sentinel", "zero"),
        diag_warn_level=float(doc.get("diag_warn_level", 0.05)), raw=doc)


def load_config(fname) -> ExperimentConfig:
    text = Path(fname).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{fname}: line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from None
    return parse_config(doc)


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------

def replication_seeds(master: int, cell: int, rep: int):
    """(simulation seed, MCMC seed) for one replication."""
    ss = np.random.SeedSequence(master, spawn_key=(cell, rep))
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _run_one(cfg: ExperimentConfig, cell: int, rep: int, diag: float,
             out_dir: Optional[str], dump_paths: bool, dump_chains: bool):
    n, eps = cfg.cells[cell]
    sim_seed, mc_seed = replication_seeds(cfg.seed, cell, rep)
    row = {"cell_id": cell, "n": n, "epsilon": eps, "lambda": cfg.lam,
           "rep": rep}
    try:
        path = simulate_path(cfg.model, cfg.theta0,
                             SimConfig(n, eps, cfg.lam, cfg.x0, cfg.substeps,
                                       sim_seed))
        res = estimate_full(path, cfg.model, eps, cfg.filter,
                            cfg.mcmc.replace(seed=mc_seed),
                            sentinel=cfg.psi_sentinel, filter_diag=diag,
                            diag_warn_level=cfg.diag_warn_level)
    except Exception as exc:  # noqa: BLE001  recorded as a warning row
        row.update({"mu0_hat": math.nan, "sigma_hat": math.nan,
                    "mu_hat": math.nan, "njumps_detected": -1,
                    "filter_diag": diag,
                    "warn_code": f"FAILED:{type(exc).__name__}"})
        for i in range(cfg.alpha_dim):
            row[f"alpha{i + 1}_hat"] = math.nan
        for i in range(4):
            row[f"acc_rate_stage{i}"] = math.nan
        return row

    row.update({"mu0_hat": res.mu0_hat[0], "sigma_hat": res.sigma_hat[0],
                "mu_hat": res.mu_hat[0]})
    for i, a in enumerate(res.alpha_hat):
        row[f"alpha{i + 1}_hat"] = a
    row["njumps_detected"] = res.n_jumps_detected
    row["filter_diag"] = res.filter_diag
    for i, a in enumerate(res.acceptance_rates()):
        row[f"acc_rate_stage{i}"] = a
    row["warn_code"] = ";".join(res.warnings)

    if out_dir and dump_paths:
        d = Path(out_dir) / "paths"
        d.mkdir(parents=True, exist_ok=True)
        write_path_csv(path, d / f"cell{cell}_rep{rep}.csv")
    if out_dir and dump_chains:
        d = Path(out_dir) / "chains"
        d.mkdir(parents=True, exist_ok=True)
        for s, name in enumerate(("mu0", "sigma", "mu", "alpha")):
            ch = res.chains.get(name)
            if ch is not None:
                write_chain_csv(ch, d / f"cell{cell}_rep{rep}_stage{s}.csv")
    return row


def write_chain_csv(chain, fname) -> None:
    d = chain.trace.shape[1]
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"u{j + 1}" for j in range(d)]
                   + ["log_target", "accepted"])
        for i in range(chain.trace.shape[0]):
            w.writerow([i] + [_fmt(u) for u in chain.trace[i]]
                       + [_fmt(chain.log_target[i]), int(chain.accepted[i])])


def _run_task(args):
    return _run_one(*args)


def run_replications(cfg: ExperimentConfig, out_dir=None, jobs: int = 1,
                     dump_paths: bool = False, dump_chains: bool = False,
                     progress=None):
    """Simulate and estimate every (cell, replication); returns
    ``(rows, summary)`` and writes results.csv / summary.csv when
    ``out_dir`` is given."""
    diags = {}
    for ci, (n, eps) in enumerate(cfg.cells):
        diags[ci] = filter_validity_diagnostic(
            cfg.model, cfg.theta0, cfg.filter.v2, cfg.filter.rho, n, cfg.lam,
            x0=cfg.x0)
    out = str(out_dir) if out_dir is not None else None
    tasks = [(cfg, ci, r, diags[ci], out, dump_paths, dump_chains)
             for ci in range(len(cfg.cells)) for r in range(cfg.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_run_task, tasks, chunksize=4))
    else:
        rows = []
        for i, t in enumerate(tasks):
            rows.append(_run_task(t))
            if progress:
                progress(i + 1, len(tasks))
    rows.sort(key=lambda r: (r["cell_id"], r["rep"]))
    summary = summarize(rows, cfg.cells)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, cfg.columns(), Path(out) / "results.csv")
        summary.to_csv(Path(out) / "summary.csv")
    return rows, summary


def write_results_csv(rows, columns, fname) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_results_csv(fname) -> list:
    out = []
    with open(fname, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if k == "warn_code":
                    row[k] = v
                elif k in ("cell_id", "n", "rep", "njumps_detected"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    n: int
    epsilon: float
    mean: float
    sd: float
    count: int
    mean_acceptance: float
    warnings: int


@dataclass
class SummaryTable:
    rows: list

    def get(self, estimator: str, n: int, epsilon: float) -> SummaryRow:
        for r in self.rows:
            if r.estimator == estimator and r.n == n and \
                    math.isclose(r.epsilon, epsilon):
                return r
        raise KeyError((estimator, n, epsilon))

    def to_csv(self, fname) -> None:
        with open(fname, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "n", "epsilon", "mean", "sd", "count",
                        "mean_acc_rate", "warnings"])
            for r in self.rows:
                w.writerow([r.estimator, r.n, _fmt(r.epsilon), _fmt(r.mean),
                            _fmt(r.sd), r.count, _fmt(r.mean_acceptance),
                            r.warnings])

    def to_text(self) -> str:
        lines = [f"{'estimator':<11}{'n':>6}{'eps':>7}{'mean':>11}"
                 f"{'sd':>11}{'R':>6}{'acc':>7}{'warn':>6}"]
        for r in self.rows:
            lines.append(f"{r.estimator:<11}{r.n:>6}{r.epsilon:>7g}"
                         f"{r.mean:>11.5f}{r.sd:>11.5f}{r.count:>6}"
                         f"{r.mean_acceptance:>7.3f}{r.warnings:>6}")
        return "\n".join(lines) + "\n"


def _acc_column(est: str, row) -> float:
    stage = _STAGE_OF.get(est, 3)
    return row.get(f"acc_rate_stage{stage}", math.nan)


def summarize(rows, cells=None) -> SummaryTable:
    """Per (estimator, n, epsilon): mean, unbiased sd and counts."""
    if cells is None:
        cells = []
        for r in rows:
            key = (int(r["n"]), float(r["epsilon"]))
            if key not in cells:
                cells.append(key)
    ests = [e for e in ESTIMATORS if not rows or e in rows[0]]
    if rows:
        ests += sorted(k for k in rows[0]
                       if k.startswith("alpha") and k.endswith("_hat")
                       and k not in ests)
    out = []
    for n, eps in cells:
        cell_rows = [r for r in rows if int(r["n"]) == n
                     and math.isclose(float(r["epsilon"]), eps)]
        if not cell_rows:
            warnings.warn(f"no replications for cell n={n}, eps={eps}; "
                          "omitted from summary")
            continue
        nwarn = sum(1 for r in cell_rows if r.get("warn_code"))
        for est in ests:
            vals = np.array([float(r[est]) for r in cell_rows])
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                warnings.warn(f"no finite {est} values for n={n}, eps={eps}")
                continue
            sd = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
            accs = np.array([_acc_column(est, r) for r in cell_rows])
            acc = float(np.nanmean(accs)) if np.isfinite(accs).any() \
                else math.nan
            out.append(SummaryRow(est, n, eps, float(np.mean(vals)), sd,
                                  int(vals.size), acc, nwarn))
    return SummaryTable(out)


def assumption_report(cfg: ExperimentConfig) -> str:
    rho = None if cfg.filter.kind == "rank" else cfg.filter.rho
    rep = validate_assumptions(cfg.model, cfg.theta0, rho=rho, x0=cfg.x0)
    lines = [rep.to_text()]
    for n, eps in cfg.cells:
        d = filter_validity_diagnostic(cfg.model, cfg.theta0, cfg.filter.v2,
                                       cfg.filter.rho, n, cfg.lam, x0=cfg.x0)
        flag = "WARN" if d > cfg.diag_warn_level else "ok"
        lines.append(f"FILTER n={n} eps={eps:g} diagnostic={d:.6g} {flag}\n")
    return "".join(lines)
