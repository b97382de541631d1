"""Experiment configuration: JSON schema, validation, and run orchestration.

A config names a corpus problem, a flow with its parameters (schedules as
named families), an integrator grid, and the probes to record.  Loading fully
validates the run: every referenced name must exist and every schedule bound
must hold on the run's grid.
"""

from __future__ import annotations

import dataclasses
import json
import os
import warnings
from typing import Optional

import numpy as np

from .diagnostics import (fejer_check, nonincreasing_check, proxgrad_gap_certificate,
                          rate_fit, record_monotone_check)
from .errors import DivergenceError, FitError, SpecError
from .first_order import (DRFlowSpec, FBFFlowSpec, FBFlowSpec, KMFlowSpec, dr_field,
                          dr_probes, fb_field, fb_probes, fbf_field, fbf_probes,
                          km_field, km_probes)
from .integrate import IntegratorConfig, integrate, write_trajectory_csv
from .nonconvex import nonconvex_probes, proxgrad_field
from .primal_dual import PDParams, PDState, pd_field_special, pd_probes
from .problems import ProblemDef, get_problem
from .schedules import (Schedule, affine_clamped, constant, exp_decay, inv_power,
                        over_t)
from .second_order import (DampingCondition, SecondOrderSpec, check_damping_condition,
                           second_order_field, second_order_probes)

SCHEDULE_FAMILIES = ("constant", "affine-clamped", "inv-power", "over-t", "exp-decay")


def build_schedule(spec: dict) -> Schedule:
    if not isinstance(spec, dict) or "family" not in spec:
        raise SpecError("schedule spec must be a dict with a 'family' key, got %r" % (spec,))
    family = spec["family"]
    if family == "constant":
        return constant(float(spec["value"]))
    if family == "affine-clamped":
        return affine_clamped(float(spec["intercept"]), float(spec["slope"]),
                              float(spec["lo"]), float(spec["hi"]))
    if family == "inv-power":
        return inv_power(float(spec["p"]), float(spec.get("scale", 1.0)))
    if family == "over-t":
        return over_t(float(spec["alpha"]))
    if family == "exp-decay":
        return exp_decay(float(spec["base"]), float(spec["amp"]),
                         float(spec.get("rate", 1.0)))
    raise SpecError("unknown schedule family %r; known: %s"
                    % (family, ", ".join(SCHEDULE_FAMILIES)))


@dataclasses.dataclass
class ExperimentConfig:
    problem: str
    flow: dict
    integrator: dict
    probes: Optional[list] = None
    x0: Optional[list] = None
    v0: Optional[list] = None
    out: Optional[str] = None
    seed: int = 0

    def to_dict(self) -> dict:
        out = {"problem": self.problem, "flow": self.flow, "integrator": self.integrator}
        for key in ("probes", "x0", "v0", "out"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.seed != 0:
            out["seed"] = self.seed
        return out


def integrator_from_dict(d: dict) -> IntegratorConfig:
    return IntegratorConfig(method=d.get("method", "rk4"), dt=float(d["dt"]),
                            t_start=float(d.get("t_start", 0.0)), t_end=float(d["t_end"]),
                            record_every=int(d.get("record_every", 1)))


# ---------------------------------------------------------------------------
# flow registry


def _require(problem: ProblemDef, *keys):
    for key in keys:
        if key not in problem.components:
            raise SpecError("flow needs component %r, which problem %r does not provide"
                            % (key, problem.name))


def _build_km(problem, params):
    _require(problem, "T")
    spec = KMFlowSpec(T=problem.components["T"], lam=build_schedule(params["lambda"]),
                      averaged_alpha=params.get("averaged_alpha"))
    return km_field(spec), km_probes(spec, ref=problem.known_solution), spec


def _build_fb(problem, params):
    _require(problem, "A", "B")
    eps = params.get("epsilon")
    spec = FBFlowSpec(A=problem.components["A"], B=problem.components["B"],
                      gamma=float(params["gamma"]), lam=build_schedule(params["lambda"]),
                      epsilon=build_schedule(eps) if eps is not None else None,
                      tikhonov_sign=float(params.get("tikhonov_sign", 1.0)))
    return fb_field(spec), fb_probes(spec, ref=problem.known_solution), spec


def _build_fbf(problem, params):
    _require(problem, "A", "B")
    spec = FBFFlowSpec(A=problem.components["A"], B=problem.components["B"],
                       gamma=float(params["gamma"]), lam=float(params["lambda"]))
    return fbf_field(spec), fbf_probes(spec, ref=problem.known_solution), spec


def _build_dr(problem, params, form):
    _require(problem, "A")
    if form == "reflected":
        _require(problem, "B_mono")
        B = problem.components["B_mono"]
    else:
        _require(problem, "B")
        B = problem.components["B"]
    spec = DRFlowSpec(A=problem.components["A"], B=B, gamma=float(params["gamma"]),
                      form=form)
    ref = problem.known_solution if form == "coupled" else None
    return dr_field(spec), dr_probes(spec, ref=ref), spec


def _build_proxgrad(problem, params):
    _require(problem, "problem")
    p = problem.components["problem"]
    return proxgrad_field(p), nonconvex_probes(p), p


def _build_second_order_fb(problem, params):
    _require(problem, "A", "B")
    eta = float(params["eta"])
    beta = problem.components["B"].cocoercivity_beta
    condition = DampingCondition(
        gamma=build_schedule(params["gamma"]), lam=build_schedule(params["lambda"]),
        theta=float(params["theta"]), kind="fb",
        delta=(4.0 * beta - eta) / (2.0 * beta))
    spec = SecondOrderSpec.fb(A=problem.components["A"], B=problem.components["B"],
                              eta=eta, condition=condition)
    return (second_order_field(spec),
            second_order_probes(spec, xstar=problem.known_solution), spec)


def _build_avd(problem, params):
    _require(problem, "g")
    spec = SecondOrderSpec.avd(g=problem.components["g"], alpha=float(params["alpha"]))
    return second_order_field(spec), second_order_probes(spec, xstar=problem.known_solution), spec


def _build_pd(problem, params):
    _require(problem, "structured")
    prob = problem.components["structured"]
    pd_params = PDParams(c=float(params["c"]), gamma_relax=float(params.get("gamma_relax", 1.0)),
                         tau=build_schedule(params["tau"]))
    return pd_field_special(prob, pd_params), pd_probes(prob, pd_params), pd_params


FLOWS = {
    "km": _build_km,
    "fb": _build_fb,
    "fb-tikhonov": _build_fb,
    "fbf": _build_fbf,
    "dr-reflected": lambda p, prm: _build_dr(p, prm, "reflected"),
    "dr-coupled": lambda p, prm: _build_dr(p, prm, "coupled"),
    "proxgrad": _build_proxgrad,
    "second-order-fb": _build_second_order_fb,
    "avd": _build_avd,
    "pd": _build_pd,
}


def list_flows():
    return sorted(FLOWS.keys())


def build_run(cfg: ExperimentConfig):
    """Resolve a config into (problem, field, probes, x0, v0, integrator, spec)."""
    problem = get_problem(cfg.problem, seed=cfg.seed)
    name = cfg.flow.get("name")
    if name not in FLOWS:
        raise SpecError("unknown flow %r; known: %s" % (name, ", ".join(list_flows())))
    if name == "fb-tikhonov" and "epsilon" not in cfg.flow:
        raise SpecError("fb-tikhonov needs an 'epsilon' schedule")
    field, probes, spec = FLOWS[name](problem, cfg.flow)
    icfg = integrator_from_dict(cfg.integrator)
    if field.label in ("avd", "yosida-avd") and icfg.t_start <= 0:
        raise SpecError("vanishing-damping flows need t_start > 0")
    if cfg.probes is not None:
        keep = set(cfg.probes)
        unknown = keep - {pname for pname, _ in probes}
        if unknown:
            raise SpecError("unknown probes %s for flow %r"
                            % (sorted(unknown), name))
        probes = [pr for pr in probes if pr[0] in keep]

    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
    else:
        start = problem.default_start
        x0 = start.to_vector() if isinstance(start, PDState) else np.asarray(start, dtype=float)
    v0 = None
    if field.order == 2:
        v0 = np.asarray(cfg.v0, dtype=float) if cfg.v0 is not None else np.zeros_like(x0)

    _validate_schedule_bounds(problem, spec, icfg)
    return problem, field, probes, x0, v0, icfg, spec


def _validate_schedule_bounds(problem, spec, icfg):
    """Probe schedule-bearing specs over the run grid so bad bounds fail at load."""
    grid = np.linspace(icfg.t_start, icfg.t_end, 101)
    if isinstance(spec, (KMFlowSpec, FBFlowSpec)):
        lam_min = min(spec._lam_at(t) for t in grid)
        if lam_min <= 1e-12:
            # inf lam > 0 is the condition a finite horizon can certify; the
            # integral alternative cannot be checked numerically
            warnings.warn("relaxation schedule reaches 0 on the run grid; "
                          "convergence would rest on an integral condition that "
                          "a finite horizon cannot verify")
    elif isinstance(spec, SecondOrderSpec) and spec.condition is not None:
        report = check_damping_condition(spec.condition, grid)
        if not report["pass"]:
            raise SpecError("schedule condition fails on the run grid: %r"
                            % report["conditions"])
    elif isinstance(spec, PDParams):
        norm2 = problem.components["structured"].A.norm_estimate ** 2
        for t in grid:
            tau = spec.tau(t)
            if spec.c * tau * norm2 > 1.0 + 1e-9:
                raise SpecError("step constraint c*tau*||A||^2 <= 1 fails at t=%g" % t)


def load_config(path) -> ExperimentConfig:
    """Parse and fully validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SpecError("config %s does not parse: line %d: %s"
                        % (path, exc.lineno, exc.msg)) from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {"problem", "flow", "integrator", "probes", "x0", "v0", "out", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise SpecError("unknown config keys: %s" % sorted(unknown))
    for key in ("problem", "flow", "integrator"):
        if key not in raw:
            raise SpecError("config is missing the %r section" % key)
    cfg = ExperimentConfig(problem=raw["problem"], flow=raw["flow"],
                           integrator=raw["integrator"], probes=raw.get("probes"),
                           x0=raw.get("x0"), v0=raw.get("v0"), out=raw.get("out"),
                           seed=int(raw.get("seed", 0)))
    build_run(cfg)  # full validation
    return cfg


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# run orchestration


def _main_residual_record(records: dict) -> Optional[str]:
    for name in ("fp_residual", "crit_residual", "feas_norm"):
        if name in records:
            return name
    return None


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run a validated config; write trajectory CSV, diagnostics JSON, summary line.

    On divergence the partial trajectory is written before the error is
    re-raised.  Returns the summary dict.
    """
    problem, field, probes, x0, v0, icfg, spec = build_run(cfg)
    out = out_dir or cfg.out or "."
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "trajectory.csv")
    diag_path = os.path.join(out, "diagnostics.json")
    summary_path = os.path.join(out, "summary.txt")

    try:
        traj = integrate(field, x0, icfg, v0=v0, probes=probes)
    except DivergenceError as exc:
        if exc.trajectory is not None and len(exc.trajectory.times):
            write_trajectory_csv(exc.trajectory, csv_path)
        with open(diag_path, "w", encoding="utf-8") as fh:
            json.dump({"diverged": True, "last_finite_t": exc.last_finite_t}, fh, indent=2)
        raise

    write_trajectory_csv(traj, csv_path)
    diagnostics = {"diverged": False, "checks": []}
    res_name = _main_residual_record(traj.records)
    final_residual = float(traj.records[res_name][-1]) if res_name else np.nan

    # Fejer monotonicity only holds for the unperturbed flows
    if problem.known_solution is not None and not isinstance(problem.known_solution, PDState):
        if field.order == 1 and field.label in ("km", "fb", "dr-reflected"):
            diagnostics["checks"].append(fejer_check(traj, problem.known_solution))
    if field.label == "km" and "fp_residual" in traj.records:
        diagnostics["checks"].append(record_monotone_check(traj, "fp_residual"))
    if field.label == "proxgrad" and "merit_H" in traj.records:
        diagnostics["checks"].append(
            nonincreasing_check(traj.times, traj.records["merit_H"], name="merit_H"))
    if (field.label == "fb" and isinstance(spec, FBFlowSpec)
            and spec.lam.bounds == (1.0, 1.0)
            and problem.known_solution is not None
            and "f" in problem.components and "g" in problem.components):
        q = spec.gamma * problem.components["g"].grad_lipschitz
        if q * (3.0 + q) <= 1.0:
            diagnostics["checks"].append(proxgrad_gap_certificate(
                traj, problem.components["f"], problem.components["g"], spec.gamma,
                problem.known_solution))

    fitted = {}
    if res_name is not None:
        vals = traj.records[res_name]
        mask = (vals > 0) & (traj.times > 0)
        if int(np.sum(mask)) >= 10:
            try:
                for model in ("power", "exponential"):
                    fit = rate_fit(traj.times[mask], vals[mask], model=model)
                    fitted[model] = {"exponent": fit.exponent, "r2": fit.r2}
            except FitError:
                pass
    diagnostics["rate_fits"] = fitted
    diagnostics["final_residual"] = final_residual
    diagnostics["passed"] = all(c.get("pass", True) for c in diagnostics["checks"])

    with open(diag_path, "w", encoding="utf-8") as fh:
        json.dump(diagnostics, fh, indent=2, sort_keys=True, default=float)

    best_rate = ""
    if fitted:
        model = max(fitted, key=lambda mdl: fitted[mdl]["r2"])
        best_rate = "%s(exponent=%.3g, r2=%.4f)" % (model, fitted[model]["exponent"],
                                                    fitted[model]["r2"])
    summary = {"flow": cfg.flow.get("name"), "problem": cfg.problem,
               "final_residual": final_residual, "rate": best_rate,
               "passed": diagnostics["passed"], "out": out}
    line = ("flow=%(flow)s problem=%(problem)s final_residual=%(final_residual).3e "
            "rate=%(rate)s passed=%(passed)s" % summary)
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(line + "\n")
    summary["line"] = line
    return summary
