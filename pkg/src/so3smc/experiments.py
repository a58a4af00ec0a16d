"""Scenario runners that write CSV trajectories and a metrics summary.

Every runner returns a :class:`MetricsSummary`. Checks are threshold
comparisons whose limits come from the scenario's ``expect`` block, with
defaults matching the shipped scenarios.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Scenario, ScenarioKind
from .controllers import S1Variant
from .properties import SuiteResult, run_all
from .records import write_cylinder_csv, write_trajectory_csv
from .sim import (
    RunMetrics,
    Trajectory,
    portrait_grid,
    reach_tolerance,
    simulate_cylinder_grid,
    simulate_quat_closed_loop,
    simulate_so3_closed_loop,
)

UNWINDING_TRACE = 0.0
SO3_HOLD_TOL = 1e-3
QUAT_RECOVER_TOL = 0.05
TRACK_TR_TOL = 1e-3
TRACK_OMEGA_TOL = 1e-2
FIXED_POINT_TOL = 1e-6


@dataclass
class Check:
    """``value op limit`` with ``op`` one of ``<``, ``<=``, ``>=``, ``==``."""

    name: str
    value: float | bool
    op: str
    limit: float | bool

    @property
    def passed(self) -> bool:
        v, lim = self.value, self.limit
        if self.op == "<":
            return v < lim
        if self.op == "<=":
            return v <= lim
        if self.op == ">=":
            return v >= lim
        return v == lim

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "op": self.op, "limit": self.limit,
                "passed": self.passed}

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(d["name"], d["value"], d["op"], d["limit"])


@dataclass
class MetricsSummary:
    """Per-run metrics, scenario-level facts, checks and suite results."""

    scenario: str
    kind: str
    seed: int
    runs: dict = field(default_factory=dict)
    facts: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and self.suites_passed

    @property
    def suites_passed(self) -> bool:
        return all(s.passed is not False for s in self.suites)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "kind": self.kind,
            "seed": self.seed,
            "runs": {k: v.to_dict() for k, v in self.runs.items()},
            "facts": self.facts,
            "checks": [c.to_dict() for c in self.checks],
            "suites": [s.to_dict() for s in self.suites],
            "files": list(self.files),
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsSummary":
        return cls(
            scenario=d["scenario"],
            kind=d["kind"],
            seed=d["seed"],
            runs={k: RunMetrics.from_dict(v) for k, v in d["runs"].items()},
            facts=d["facts"],
            checks=[Check.from_dict(c) for c in d["checks"]],
            suites=[SuiteResult.from_dict(s) for s in d["suites"]],
            files=list(d["files"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsSummary":
        return cls.from_dict(json.loads(text))

    def table(self) -> str:
        lines = [f"scenario {self.scenario} ({self.kind}), seed {self.seed}"]
        if self.runs:
            lines.append(f"  {'run':<12}{'reach_time':>12}{'min_tr':>14}{'final_tr':>14}"
                         f"{'final|w_e|':>13}{'max|u|':>10}")
            for name, m in self.runs.items():
                reach = "-" if m.reach_time is None else f"{m.reach_time:.4f}"
                lines.append(f"  {name:<12}{reach:>12}{m.min_tr_Re:>14.9f}{m.final_tr_Re:>14.9f}"
                             f"{m.final_omega_e_norm:>13.3e}{m.max_u_norm:>10.4f}")
        for s in self.suites:
            verdict = "info" if s.passed is None else ("pass" if s.passed else "FAIL")
            tol = "-" if s.tolerance is None else f"{s.tolerance:.0e}"
            lines.append(f"  suite {s.name:<24} n={s.samples:<6} max={s.max_residual:.3e} "
                         f"tol={tol:<6} {verdict}")
        for key in sorted(self.facts):
            lines.append(f"  {key}: {self.facts[key]}")
        for c in self.checks:
            lines.append(f"  check {c.name}: {c.value} {c.op} {c.limit} "
                         f"{'pass' if c.passed else 'FAIL'}")
        lines.append(f"  overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def write(self, prefix) -> Path:
        path = Path(f"{prefix}_summary.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def _new_summary(sc: Scenario) -> MetricsSummary:
    return MetricsSummary(scenario=sc.name, kind=sc.kind.value, seed=sc.seed)


def _add_file(summary: MetricsSummary, path: Path) -> None:
    summary.files.append(path.name)


def _post_reach_sigma(traj: Trajectory, reach_time: float | None) -> float | None:
    """Largest recorded ``|sigma|`` from the declared reach time on."""
    if reach_time is None:
        return None
    after = traj.t >= reach_time
    return float(np.max(np.linalg.norm(traj.sigma[after], axis=1)))


def run_unwinding_comparison(sc: Scenario) -> MetricsSummary:
    """Quaternion law versus the SO(3) law from the same physical attitude."""
    _require(sc, ScenarioKind.UNWINDING)
    summary = _new_summary(sc)
    q_traj, q_m = simulate_quat_closed_loop(
        sc.quat_initial, sc.inertia, sc.quat_smc, sc.disturbance, sc.sim
    )
    r_traj, r_m = simulate_so3_closed_loop(
        sc.initial, sc.reference, sc.inertia, sc.smc, sc.disturbance, sc.sim
    )
    _add_file(summary, write_trajectory_csv(f"{sc.output_prefix}_quaternion.csv", q_traj))
    _add_file(summary, write_trajectory_csv(f"{sc.output_prefix}_so3.csv", r_traj))
    summary.runs = {"quaternion": q_m, "so3": r_m}
    q_unwinds = q_m.min_tr_Re < UNWINDING_TRACE
    r_unwinds = r_m.min_tr_Re < UNWINDING_TRACE
    summary.facts = {"quaternion_unwinds": q_unwinds, "so3_unwinds": r_unwinds}
    ex = sc.expect
    summary.checks = [
        Check("quaternion_unwinds", q_unwinds, "==", bool(ex.get("quaternion_unwinds", True))),
        Check("so3_unwinds", r_unwinds, "==", bool(ex.get("so3_unwinds", False))),
        Check("quaternion_final_tr_Re", q_m.final_tr_Re, ">=",
              float(ex.get("quaternion_final_tr_min", 3.0 - QUAT_RECOVER_TOL))),
        Check("so3_min_tr_Re", r_m.min_tr_Re, ">=",
              float(ex.get("so3_min_tr_min", 3.0 - SO3_HOLD_TOL))),
    ]
    summary.write(sc.output_prefix)
    return summary


def run_tracking(sc: Scenario) -> MetricsSummary:
    """SO(3) closed loop against the scenario reference; also serves regulation."""
    if sc.kind not in (ScenarioKind.TRACKING, ScenarioKind.REGULATION):
        raise ValueError(f"expected a tracking or regulation scenario, got {sc.kind.value}")
    summary = _new_summary(sc)
    traj, m = simulate_so3_closed_loop(
        sc.initial, sc.reference, sc.inertia, sc.smc, sc.disturbance, sc.sim
    )
    _add_file(summary, write_trajectory_csv(f"{sc.output_prefix}_so3.csv", traj))
    summary.runs = {"so3": m}
    tol = reach_tolerance(sc.smc.eps_layer)
    post = _post_reach_sigma(traj, m.reach_time)
    summary.facts = {"reach_tol": tol, "post_reach_sigma_max": post}
    ex = sc.expect
    summary.checks = [
        Check("final_tr_Re", m.final_tr_Re, ">=", float(ex.get("final_tr_min", 3.0 - TRACK_TR_TOL))),
        Check("final_omega_e_norm", m.final_omega_e_norm, "<=",
              float(ex.get("final_omega_e_max", TRACK_OMEGA_TOL))),
    ]
    if "min_tr_min" in ex:
        summary.checks.append(Check("min_tr_Re", m.min_tr_Re, ">=", float(ex["min_tr_min"])))
    if post is not None:
        summary.checks.append(Check("post_reach_sigma", post, "<=", 2.0 * tol))
    summary.write(sc.output_prefix)
    return summary


def _circular_distance(theta: float, omega: float) -> float:
    dtheta = min(theta, 2.0 * math.pi - theta)
    return math.hypot(dtheta, omega)


def run_cylinder_portrait(sc: Scenario) -> MetricsSummary:
    """Grid of cylinder runs per variant, one long-format CSV per variant."""
    _require(sc, ScenarioKind.CYLINDER_PORTRAIT)
    p = sc.portrait
    summary = _new_summary(sc)
    inits = portrait_grid(p.n_theta, p.omega_range, p.n_omega)
    checks = []
    for variant in p.variants:
        runs = simulate_cylinder_grid(inits, variant, sc.sim, workers=p.workers)
        _add_file(summary, write_cylinder_csv(f"{sc.output_prefix}_{variant.value}.csv", runs))
        converged, stuck, unstable_drift = [], [], 0.0
        for init, run in zip(inits, runs):
            end = run.final
            at_unstable = init.theta == math.pi and init.omega == 0.0
            if at_unstable:
                drift = float(np.max(np.hypot(run.column("theta") - math.pi, run.column("omega"))))
                unstable_drift = max(unstable_drift, drift)
            if _circular_distance(end.theta, end.omega) <= p.converge_tol:
                converged.append(run.run_id)
            else:
                stuck.append(run.run_id)
        jump_runs = [r.run_id for r in runs if np.any(r.column("jump") > 0)]
        summary.facts[variant.value] = {
            "runs": len(runs),
            "converged": len(converged),
            "not_converged_ids": stuck,
            "jump_run_ids": jump_runs,
        }
        if variant is S1Variant.SMOOTH:
            unstable_ids = [i for i, s in enumerate(inits) if s.theta == math.pi and s.omega == 0.0]
            checks.append(Check("smooth_nonconverged_are_unstable_point",
                                stuck == unstable_ids, "==", True))
            if unstable_ids:
                checks.append(Check("smooth_unstable_point_drift", unstable_drift, "<=",
                                    FIXED_POINT_TOL))
    summary.checks = checks
    summary.write(sc.output_prefix)
    return summary


def run_property_suite(sc: Scenario) -> MetricsSummary:
    """All invariant suites; the summary fails if any suite exceeds its tolerance."""
    _require(sc, ScenarioKind.PROPERTY_SUITE)
    s = sc.suite
    summary = _new_summary(sc)
    summary.suites = run_all(sc.seed, s.samples, s.flow_samples, s.flow_T, s.flow_dt)
    summary.write(sc.output_prefix)
    return summary


def _require(sc: Scenario, kind: ScenarioKind) -> None:
    if sc.kind is not kind:
        raise ValueError(f"expected a {kind.value} scenario, got {sc.kind.value}")


RUNNERS = {
    ScenarioKind.UNWINDING: run_unwinding_comparison,
    ScenarioKind.TRACKING: run_tracking,
    ScenarioKind.REGULATION: run_tracking,
    ScenarioKind.CYLINDER_PORTRAIT: run_cylinder_portrait,
    ScenarioKind.PROPERTY_SUITE: run_property_suite,
}


def run_scenario(sc: Scenario) -> MetricsSummary:
    return RUNNERS[sc.kind](sc)
