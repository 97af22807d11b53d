"""Oracle scoring of proposed plans, GRR/BTR aggregation, attempt- and
temperature-sweeps, and report emission.

Scoring replays the proposed action sequence through the ground-truth
simulator from the instance's initial state; the generator's own state texts
play no part in the verdict. A plan that executes legally but ends away from
the goal lands in a separate diagnostic bucket: it counts toward neither GRR
nor BTR.
"""

from __future__ import annotations

import csv
import json
import multiprocessing as mp
from dataclasses import dataclass, field, replace

import numpy as np

from . import blocksworld as bw
from .dataset import TestInstance
from .sampling import (InferenceConfig, PlanResult, TERM_GOAL, _attempt_rng,
                       _rollout, make_generator_fn, make_learned_gate,
                       oracle_gate)

GOAL_REACHED = "goal_reached"
BAD_TRANSITION = "bad_transition"
NO_PLAN = "no_plan"
LEGAL_OFF_GOAL = "legal_off_goal"
OUTCOMES = (GOAL_REACHED, BAD_TRANSITION, NO_PLAN, LEGAL_OFF_GOAL)


@dataclass(frozen=True)
class PlanOutcome:
    kind: str
    first_illegal_index: int | None = None


@dataclass
class EvalReport:
    method: str
    k: int
    tau: float
    top_p: float
    l_max: int
    seed: int
    model_ids: dict
    counts: dict
    grr: float
    btr: float
    instance_records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method, "k": self.k, "tau": self.tau,
            "top_p": self.top_p, "l_max": self.l_max, "seed": self.seed,
            "model_ids": self.model_ids, "counts": self.counts,
            "grr": self.grr, "btr": self.btr,
            "instance_records": self.instance_records,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


@dataclass
class SweepResult:
    axis: str            # "k" or "tau"
    values: list
    reports: list        # one EvalReport per axis value
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"axis": self.axis, "values": self.values,
                "reports": [r.to_dict() for r in self.reports],
                "diagnostics": self.diagnostics}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepResult":
        return cls(d["axis"], d["values"],
                   [EvalReport.from_dict(r) for r in d["reports"]],
                   d.get("diagnostics", {}))


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def score_plan(instance: TestInstance, actions: list[str] | None) -> PlanOutcome:
    """Replay a proposed action sequence through the simulator."""
    if actions is None:
        return PlanOutcome(NO_PLAN)
    state = instance.initial
    for i, text in enumerate(actions):
        try:
            action = bw.parse_action(text)
        except bw.ParseError:
            return PlanOutcome(BAD_TRANSITION, first_illegal_index=i)
        if not bw.is_applicable(state, action):
            return PlanOutcome(BAD_TRANSITION, first_illegal_index=i)
        state = bw.apply_action(state, action)
    if bw.is_goal(state, instance.goal):
        return PlanOutcome(GOAL_REACHED)
    return PlanOutcome(LEGAL_OFF_GOAL)


def instance_seed_seq(master_seed: int, instance_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(master_seed, 3, instance_index))


def _aggregate(records: list[dict], method: str, cfg: InferenceConfig,
               seed: int, model_ids: dict, tau: float = None) -> EvalReport:
    counts = {o: 0 for o in OUTCOMES}
    for rec in records:
        counts[rec["outcome"]] += 1
    n = len(records)
    return EvalReport(
        method=method, k=cfg.k, tau=tau if tau is not None else cfg.sampling.temperature,
        top_p=cfg.sampling.top_p, l_max=cfg.l_max, seed=seed,
        model_ids=model_ids, counts=counts,
        grr=counts[GOAL_REACHED] / n, btr=counts[BAD_TRANSITION] / n,
        instance_records=records,
    )


def _instance_record(index: int, instance: TestInstance,
                     result: PlanResult) -> dict:
    outcome = score_plan(instance, result.plan)
    return {
        "index": index,
        "outcome": outcome.kind,
        "first_illegal_index": outcome.first_illegal_index,
        "attempts_used": result.attempts_used,
        "first_goal_attempt": result.first_goal_attempt(),
        "plan_length": len(result.plan) if result.plan is not None else None,
        "terminations": [a.termination for a in result.attempts],
    }


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

def run_benchmark(planner_fn, instances: list[TestInstance],
                  cfg: InferenceConfig, master_seed: int, method: str,
                  model_ids: dict | None = None,
                  keep_results: bool = False):
    """Apply planner_fn(initial_text, goal_text, cfg, seed_seq) to every
    instance and aggregate GRR/BTR. Sequential in-process driver; the CLI
    layer parallelizes across instances with worker processes."""
    records = []
    results = []
    for i, inst in enumerate(instances):
        result = planner_fn(inst.initial.text(), inst.goal.text(), cfg,
                            instance_seed_seq(master_seed, i))
        records.append(_instance_record(i, inst, result))
        if keep_results:
            results.append(result)
    report = _aggregate(records, method, cfg, master_seed, model_ids or {})
    return (report, results) if keep_results else report


def derive_report_at_k(report: EvalReport, results: list[PlanResult],
                       instances: list[TestInstance], k: int) -> EvalReport:
    """Project a k_max benchmark down to a smaller attempt budget. Exact
    because attempt i's rng depends only on (instance, i): the smaller run's
    rollouts are a prefix of the recorded ones."""
    if k > report.k:
        raise ValueError(f"cannot derive k={k} from a k={report.k} run")
    records = []
    for rec, result, inst in zip(report.instance_records, results, instances):
        first = result.first_goal_attempt()
        if first is not None and first <= k:
            limited = PlanResult(result.attempts[first - 1].actions(), first,
                                 result.attempts[:first])
        else:
            limited = PlanResult(None, min(k, len(result.attempts)),
                                 result.attempts[:k])
        records.append(_instance_record(rec["index"], inst, limited))
    cfg_k = InferenceConfig(k=k, l_max=report.l_max)
    out = _aggregate(records, report.method, cfg_k, report.seed,
                     report.model_ids, tau=report.tau)
    out.top_p = report.top_p
    return out


def sweep_attempts(planner_fn, instances: list[TestInstance],
                   k_values: list[int], base_cfg: InferenceConfig,
                   master_seed: int, method: str,
                   model_ids: dict | None = None) -> SweepResult:
    """One report per k, derived from a single run at max(k_values) via the
    shared per-attempt rng streams; GRR is non-decreasing in k by
    construction."""
    if sorted(k_values) != list(k_values) or len(set(k_values)) != len(k_values):
        raise ValueError("k values must be strictly increasing")
    cfg = replace(base_cfg, k=max(k_values))
    full, results = run_benchmark(planner_fn, instances, cfg, master_seed,
                                  method, model_ids, keep_results=True)
    reports = [derive_report_at_k(full, results, instances, k)
               for k in k_values]
    return SweepResult("k", list(k_values), reports)


def sweep_temperature(planner_factory, instances: list[TestInstance],
                      tau_values: list[float], base_cfg: InferenceConfig,
                      master_seed: int, method: str,
                      model_ids: dict | None = None,
                      diversity_fn=None) -> SweepResult:
    """One full benchmark per temperature, everything else fixed.
    diversity_fn(tau) -> mean distinct rollouts per instance goes into the
    sweep diagnostics when provided."""
    if any(t <= 0 for t in tau_values):
        raise ValueError("temperatures must be positive")
    reports = []
    for tau in tau_values:
        cfg = replace(base_cfg,
                      sampling=replace(base_cfg.sampling, temperature=tau))
        reports.append(run_benchmark(planner_factory(tau), instances, cfg,
                                     master_seed, method, model_ids))
    diagnostics = {}
    if diversity_fn is not None:
        diagnostics["mean_distinct_rollouts"] = {
            str(tau): diversity_fn(tau) for tau in tau_values}
    return SweepResult("tau", list(tau_values), reports, diagnostics)


STREAM_PROBE = 4


def probe_seed_seq(master_seed: int, instance_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(master_seed, STREAM_PROBE,
                                           instance_index))


def count_distinct_rollouts(gen_fn, initial_text: str, goal_text: str,
                            instance_index: int, rollouts: int,
                            probe_steps: int, master_seed: int) -> int:
    """Distinct action sequences among a fixed number of ungated rollouts,
    truncated at probe_steps; the sweep's diversity diagnostic."""
    ss = probe_seed_seq(master_seed, instance_index)
    seen = set()
    for j in range(rollouts):
        att = _rollout(gen_fn, goal_text, initial_text, probe_steps,
                       _attempt_rng(ss, j))
        seen.add(tuple(att.actions()))
    return len(seen)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["method", "k", "tau", "top_p", "l_max", "seed", "grr", "btr",
               "n_goal_reached", "n_bad_transition", "n_no_plan",
               "n_legal_off_goal"]


def _csv_row(report: EvalReport) -> dict:
    row = {
        "method": report.method, "k": report.k, "tau": report.tau,
        "top_p": report.top_p, "l_max": report.l_max, "seed": report.seed,
        "grr": report.grr, "btr": report.btr,
    }
    for name in OUTCOMES:
        row[f"n_{name}"] = report.counts[name]
    return row


def emit_report(report_or_sweep, path, fmt: str = "structured") -> None:
    """structured: JSON round-trips via read_report; csv: one aggregate row
    per report with a fixed header."""
    if fmt == "structured":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report_or_sweep.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
    elif fmt == "csv":
        reports = (report_or_sweep.reports
                   if isinstance(report_or_sweep, SweepResult)
                   else [report_or_sweep])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for rep in reports:
                writer.writerow(_csv_row(rep))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return SweepResult.from_dict(d) if "axis" in d else EvalReport.from_dict(d)
