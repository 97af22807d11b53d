"""Single entry point wiring every stage: data generation, generator and
verifier training, evaluation, sweeps, and the golden-fixture replay.

All knobs live in RunConfig; values come from built-in defaults, then an
optional key = value config file, then command-line flags. Every random
choice derives from the master seed, so rerunning any command with the same
config produces checksum-identical artifacts regardless of --workers.

Exit codes: 0 success, 1 validation failure, 2 missing input artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, fields, replace
from functools import partial
from multiprocessing import get_context
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataset as ds
from .evaluate import (EvalReport, SweepResult, _aggregate, _instance_record,
                       count_distinct_rollouts, derive_report_at_k,
                       emit_report, instance_seed_seq)
from .fixtures import FixtureMismatch, replay_reference_plan
from .sampling import InferenceConfig, SamplingParams
from .vocab import Vocabulary, transition_block


class ConfigError(ValueError):
    pass


class MissingArtifact(Exception):
    pass


@dataclass
class RunConfig:
    out_dir: str = "runs/exp"
    seed: int = 0
    workers: int = 2
    data_profile: str = "desk"
    model_profile: str = "desk"
    gen_train_profile: str = "desk-generator"
    ver_train_profile: str = "desk-verifier"
    epochs: Optional[int] = None       # override the training profile
    batch_size: Optional[int] = None
    lr: Optional[float] = None
    warmup_steps: Optional[int] = None
    negatives_mode: str = "global"
    negatives_per_positive: int = 1
    oracle_filter: bool = False
    verifier_init: str = "from_generator"
    verifier_ckpt: str = ""            # eval-time verifier; default by init
    k: int = 25
    tau: float = 1.0
    top_p: float = 0.99
    l_max: int = 40
    verifier_threshold: float = 0.5
    max_completion_tokens: int = 160
    k_values: str = "1,8,16,25"
    tau_values: str = "0.2,0.5,0.8,1.1"
    sweep_methods: str = "gen,gen+ver"
    tau_sweep_method: str = "gen+ver"
    probe_instances: int = 64
    probe_rollouts: int = 8
    probe_steps: int = 12
    dump_plans: bool = False


_BOOL_STRINGS = {"true": True, "1": True, "yes": True,
                 "false": False, "0": False, "no": False}


def parse_config_file(path) -> dict:
    """key = value lines; '#' starts a comment; keys match RunConfig fields."""
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        ftype = types[key]
        try:
            if ftype == "bool":
                out[key] = _BOOL_STRINGS[value.lower()]
            elif ftype in ("int", "Optional[int]"):
                out[key] = int(value)
            elif ftype in ("float", "Optional[float]"):
                out[key] = float(value)
            else:
                out[key] = value
        except (KeyError, ValueError):
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    if cfg.data_profile not in ds.DATA_PROFILES:
        raise ConfigError(f"unknown data profile {cfg.data_profile!r}")
    if cfg.negatives_mode not in ("global", "instance-restricted"):
        raise ConfigError(f"unknown negatives mode {cfg.negatives_mode!r}")
    if cfg.verifier_init not in ("from_generator", "fresh"):
        raise ConfigError(f"unknown verifier init {cfg.verifier_init!r}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


class Paths:
    def __init__(self, out_dir):
        self.root = Path(out_dir)
        self.data = self.root / "data"
        self.models = self.root / "models"
        self.reports = self.root / "reports"
        self.trajectories = self.data / "trajectories.jsonl"
        self.trajectories_val = self.data / "trajectories_val.jsonl"
        self.transitions = self.data / "transitions.jsonl"
        self.transitions_val = self.data / "transitions_val.jsonl"
        self.verifier_examples = self.data / "verifier.jsonl"
        self.verifier_examples_val = self.data / "verifier_val.jsonl"
        self.test_instances = self.data / "test_instances.jsonl"
        self.manifest = self.data / "manifest.json"
        self.generator = self.models / "generator.ckpt"
        self.verifier_gen = self.models / "verifier_gen.ckpt"
        self.verifier_base = self.models / "verifier_base.ckpt"

    def verifier_for(self, init: str) -> Path:
        return self.verifier_gen if init == "from_generator" else self.verifier_base

    def require(self, *paths) -> None:
        for p in paths:
            if not Path(p).exists():
                raise MissingArtifact(f"missing artifact: {p}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with get_context("spawn").Pool(workers) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (workers * 8)))


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> None:
    profile = ds.DATA_PROFILES[cfg.data_profile]
    paths = Paths(cfg.out_dir)
    paths.data.mkdir(parents=True, exist_ok=True)

    def explore(stream, count):
        job = partial(ds.random_trajectory, cfg.seed, stream,
                      min_blocks=profile.min_blocks,
                      max_blocks=profile.max_blocks, max_len=profile.max_len)
        return _pool_map(job, range(count), cfg.workers)

    train_trajs = explore(ds.STREAM_TRAIN, profile.train_states)
    val_trajs = explore(ds.STREAM_VAL, profile.val_states)
    train_transitions = ds.build_generator_corpus(train_trajs)
    val_transitions = ds.build_generator_corpus(val_trajs)

    ver_train = ds.build_verifier_corpus(
        train_transitions, cfg.negatives_per_positive, cfg.negatives_mode,
        ds.derived_rng(cfg.seed, ds.STREAM_VERIFIER_TRAIN, 0),
        oracle_filter=cfg.oracle_filter)
    ver_val = ds.build_verifier_corpus(
        val_transitions, cfg.negatives_per_positive, cfg.negatives_mode,
        ds.derived_rng(cfg.seed, ds.STREAM_VERIFIER_VAL, 0),
        oracle_filter=cfg.oracle_filter)

    test_job = partial(ds.build_test_instance, cfg.seed,
                       max_len=profile.test_max_len,
                       min_blocks=profile.min_blocks,
                       max_blocks=profile.max_blocks)
    test_instances = _pool_map(test_job, range(profile.test_count), cfg.workers)

    ds.write_records(paths.trajectories, train_trajs)
    ds.write_records(paths.trajectories_val, val_trajs)
    ds.write_records(paths.transitions, train_transitions)
    ds.write_records(paths.transitions_val, val_transitions)
    ds.write_records(paths.verifier_examples, ver_train)
    ds.write_records(paths.verifier_examples_val, ver_val)
    ds.write_records(paths.test_instances, test_instances)

    files = {p.name: sha256_file(p) for p in [
        paths.trajectories, paths.trajectories_val, paths.transitions,
        paths.transitions_val, paths.verifier_examples,
        paths.verifier_examples_val, paths.test_instances]}
    manifest = {
        "profile": cfg.data_profile,
        "profile_config": profile.__dict__,
        "seed": cfg.seed,
        "negatives_mode": cfg.negatives_mode,
        "negatives_per_positive": cfg.negatives_per_positive,
        "oracle_filter": cfg.oracle_filter,
        "counts": {
            "train_trajectories": len(train_trajs),
            "train_transitions": len(train_transitions),
            "val_trajectories": len(val_trajs),
            "val_transitions": len(val_transitions),
            "verifier_train": len(ver_train),
            "verifier_val": len(ver_val),
            "test_instances": len(test_instances),
        },
        "mean_transitions_per_trajectory": round(
            len(train_transitions) / len(train_trajs), 4),
        "label_noise": {
            "train": round(ds.measure_label_noise(ver_train), 6),
            "val": round(ds.measure_label_noise(ver_val), 6),
        },
        "files": files,
    }
    paths.manifest.write_text(json.dumps(manifest, sort_keys=True, indent=1)
                              + "\n", encoding="utf-8")
    print(f"wrote {len(train_transitions)} train / {len(val_transitions)} val "
          f"transitions, {len(ver_train)} verifier examples, "
          f"{len(test_instances)} test instances to {paths.data}")
    print(f"verifier label-noise rate: train {manifest['label_noise']['train']}"
          f" val {manifest['label_noise']['val']}")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _load_manifest(paths: Paths) -> dict:
    paths.require(paths.manifest)
    return json.loads(paths.manifest.read_text(encoding="utf-8"))


def _resolve_train_cfg(cfg: RunConfig, profile_name: str, context: int):
    from .train import TRAIN_PROFILES
    if profile_name not in TRAIN_PROFILES:
        raise ConfigError(f"unknown training profile {profile_name!r}")
    tc = TRAIN_PROFILES[profile_name]
    overrides = {"seed": cfg.seed, "context": context}
    for name in ("epochs", "batch_size", "lr", "warmup_steps"):
        value = getattr(cfg, name)
        if value is not None:
            overrides[name] = value
    return replace(tc, **overrides)


def _model_cfg(cfg: RunConfig):
    from .model import MODEL_PROFILES
    if cfg.model_profile not in MODEL_PROFILES:
        raise ConfigError(f"unknown model profile {cfg.model_profile!r}")
    return MODEL_PROFILES[cfg.model_profile]


def _write_log(path, log) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def cmd_train_gen(cfg: RunConfig) -> None:
    from .checkpoint import save_checkpoint
    from .train import train_generator
    paths = Paths(cfg.out_dir)
    manifest = _load_manifest(paths)
    paths.require(paths.transitions, paths.transitions_val)
    transitions = ds.read_records(paths.transitions, ds.Transition)
    val_transitions = ds.read_records(paths.transitions_val, ds.Transition)
    vocab = Vocabulary(max_blocks=manifest["profile_config"]["max_blocks"])
    model_cfg = _model_cfg(cfg)
    train_cfg = _resolve_train_cfg(cfg, cfg.gen_train_profile, model_cfg.context)
    model, log = train_generator(transitions, val_transitions, vocab,
                                 model_cfg, train_cfg)
    paths.models.mkdir(parents=True, exist_ok=True)
    meta = {"seed": cfg.seed, "train_config": train_cfg.to_dict(),
            "corpus": manifest["counts"]["train_transitions"]}
    save_checkpoint(paths.generator, model, vocab, meta)
    _write_log(paths.models / "generator.log.jsonl", log)
    val = [r for r in log if r["split"] == "val"]
    if val:
        print(f"generator: final val loss {val[-1]['loss']:.4f} "
              f"accuracy {val[-1]['accuracy']:.4f}")
    print(f"saved {paths.generator}")


def cmd_train_ver(cfg: RunConfig) -> None:
    from .checkpoint import load_checkpoint, save_checkpoint
    from .train import train_verifier
    paths = Paths(cfg.out_dir)
    manifest = _load_manifest(paths)
    paths.require(paths.verifier_examples, paths.verifier_examples_val)
    examples = ds.read_records(paths.verifier_examples, ds.VerifierExample)
    val_examples = ds.read_records(paths.verifier_examples_val,
                                   ds.VerifierExample)
    vocab = Vocabulary(max_blocks=manifest["profile_config"]["max_blocks"])
    model_cfg = _model_cfg(cfg)
    train_cfg = _resolve_train_cfg(cfg, cfg.ver_train_profile, model_cfg.context)
    generator = None
    if cfg.verifier_init == "from_generator":
        paths.require(paths.generator)
        generator, gen_vocab, _ = load_checkpoint(paths.generator,
                                                  expected_vocab=vocab)
        if generator.cfg != model_cfg:
            raise ConfigError("generator checkpoint geometry does not match "
                              f"model profile {cfg.model_profile!r}")
    model, log = train_verifier(cfg.verifier_init, examples, val_examples,
                                vocab, model_cfg, train_cfg, generator)
    paths.models.mkdir(parents=True, exist_ok=True)
    out = paths.verifier_for(cfg.verifier_init)
    meta = {"seed": cfg.seed, "init": cfg.verifier_init,
            "train_config": train_cfg.to_dict()}
    save_checkpoint(out, model, vocab, meta)
    _write_log(out.with_suffix(".log.jsonl"), log)
    val = [r for r in log if r["split"] == "val"]
    if val:
        print(f"verifier[{cfg.verifier_init}]: held-out loss "
              f"{val[-1]['loss']:.4f} accuracy {val[-1]['accuracy']:.4f}")
    print(f"saved {out}")


# ---------------------------------------------------------------------------
# eval / sweep (worker-pool plumbing)
# ---------------------------------------------------------------------------

_EVAL: dict = {}


def _build_eval_state(spec: dict) -> dict:
    import torch

    from .checkpoint import load_checkpoint
    from .sampling import (make_generator_fn, make_learned_gate, oracle_gate,
                           plan_generator_at_k, plan_generator_verifier_at_k)
    torch.set_num_threads(1)
    generator, vocab, _ = load_checkpoint(spec["generator"])
    sampling = SamplingParams(spec["tau"], spec["top_p"],
                              spec["max_completion_tokens"])
    gen_fn = make_generator_fn(generator, vocab, sampling)
    method = spec["method"]
    if method == "gen":
        gate = None
    elif method == "gen+ver":
        verifier, ver_vocab, _ = load_checkpoint(spec["verifier"],
                                                 expected_vocab=vocab)
        gate = make_learned_gate(verifier, ver_vocab, spec["threshold"])
    elif method == "gen+oracle":
        gate = oracle_gate
    else:
        raise ConfigError(f"unknown method {method!r}")
    cfg = InferenceConfig(k=spec["k"], l_max=spec["l_max"], sampling=sampling,
                          verifier_threshold=spec["threshold"])

    if gate is None:
        def planner(init_text, goal_text, icfg, ss):
            return plan_generator_at_k(gen_fn, init_text, goal_text, icfg, ss)
    else:
        def planner(init_text, goal_text, icfg, ss):
            return plan_generator_verifier_at_k(gen_fn, gate, init_text,
                                                goal_text, icfg, ss)
    return {"planner": planner, "gen_fn": gen_fn, "cfg": cfg,
            "seed": spec["seed"]}


def _init_eval_worker(spec: dict) -> None:
    _EVAL.update(_build_eval_state(spec))


def _eval_task(task):
    i, init_text, goal_text = task
    result = _EVAL["planner"](init_text, goal_text, _EVAL["cfg"],
                              instance_seed_seq(_EVAL["seed"], i))
    return i, result


def _probe_task(task):
    i, init_text, goal_text, rollouts, steps = task
    return i, count_distinct_rollouts(_EVAL["gen_fn"], init_text, goal_text,
                                      i, rollouts, steps, _EVAL["seed"])


def _pooled(spec: dict, task_fn, tasks, workers: int):
    """Run eval tasks in spawn workers (single-threaded torch each), so
    results do not depend on the worker count."""
    ctx = get_context("spawn")
    with ctx.Pool(workers, initializer=_init_eval_worker,
                  initargs=(spec,)) as pool:
        return pool.map(task_fn, tasks, chunksize=1)


def _benchmark_pooled(spec, instances, icfg, master_seed, method, model_ids,
                      workers, keep_results=False):
    tasks = [(i, inst.initial.text(), inst.goal.text())
             for i, inst in enumerate(instances)]
    pairs = _pooled(spec, _eval_task, tasks, workers)
    results = [res for _, res in pairs]
    records = [_instance_record(i, inst, res)
               for (i, inst), res in zip(enumerate(instances), results)]
    report = _aggregate(records, method, icfg, master_seed, model_ids)
    return (report, results) if keep_results else report


def _eval_spec(cfg: RunConfig, paths: Paths, method: str, tau: float = None) -> dict:
    paths.require(paths.generator)
    spec = {
        "generator": str(paths.generator),
        "verifier": "",
        "method": method,
        "tau": cfg.tau if tau is None else tau,
        "top_p": cfg.top_p,
        "max_completion_tokens": cfg.max_completion_tokens,
        "threshold": cfg.verifier_threshold,
        "k": cfg.k,
        "l_max": cfg.l_max,
        "seed": cfg.seed,
    }
    if method == "gen+ver":
        ver = Path(cfg.verifier_ckpt) if cfg.verifier_ckpt \
            else paths.verifier_for(cfg.verifier_init)
        paths.require(ver)
        spec["verifier"] = str(ver)
    return spec


def _model_ids(spec: dict) -> dict:
    ids = {"generator": sha256_file(spec["generator"])[:12]}
    if spec["verifier"]:
        ids["verifier"] = sha256_file(spec["verifier"])[:12]
    return ids


def _method_slug(method: str) -> str:
    return method.replace("+", "_")


def _inference_cfg(cfg: RunConfig, tau: float = None) -> InferenceConfig:
    sampling = SamplingParams(cfg.tau if tau is None else tau, cfg.top_p,
                              cfg.max_completion_tokens)
    return InferenceConfig(k=cfg.k, l_max=cfg.l_max, sampling=sampling,
                           verifier_threshold=cfg.verifier_threshold)


def _load_instances(paths: Paths):
    paths.require(paths.test_instances)
    return ds.read_records(paths.test_instances, ds.TestInstance)


def _dump_plans(paths: Paths, tag: str, instances, results) -> None:
    out_dir = paths.reports / f"plans_{tag}"
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, (inst, result) in enumerate(zip(instances, results)):
        first = result.first_goal_attempt()
        if first is None:
            continue
        attempt = result.attempts[first - 1]
        goal = inst.goal.text()
        state = inst.initial.text()
        blocks = []
        for n, (action, nxt) in enumerate(attempt.transitions, start=1):
            blocks.append(f"TRANSITION {n}\n"
                          + transition_block(goal, state, action, nxt))
            state = nxt
        (out_dir / f"instance_{i:04d}.txt").write_text(
            "\n\n".join(blocks) + "\n", encoding="utf-8")


def cmd_eval(cfg: RunConfig, method: str) -> None:
    paths = Paths(cfg.out_dir)
    instances = _load_instances(paths)
    spec = _eval_spec(cfg, paths, method)
    icfg = _inference_cfg(cfg)
    report, results = _benchmark_pooled(spec, instances, icfg, cfg.seed,
                                        method, _model_ids(spec), cfg.workers,
                                        keep_results=True)
    paths.reports.mkdir(parents=True, exist_ok=True)
    tag = f"{_method_slug(method)}_k{cfg.k}_tau{cfg.tau}_seed{cfg.seed}"
    emit_report(report, paths.reports / f"eval_{tag}.json", "structured")
    emit_report(report, paths.reports / f"eval_{tag}.csv", "csv")
    if cfg.dump_plans:
        _dump_plans(paths, tag, instances, results)
    print(f"{method}@{cfg.k}: GRR {report.grr:.3f} BTR {report.btr:.3f} "
          f"counts {report.counts}")
    print(f"wrote {paths.reports / f'eval_{tag}.json'}")


def cmd_sweep(cfg: RunConfig, axis: str) -> None:
    paths = Paths(cfg.out_dir)
    instances = _load_instances(paths)
    paths.reports.mkdir(parents=True, exist_ok=True)
    if axis == "k":
        k_values = [int(v) for v in cfg.k_values.split(",")]
        if sorted(set(k_values)) != k_values:
            raise ConfigError("k values must be strictly increasing")
        methods = [m.strip() for m in cfg.sweep_methods.split(",") if m.strip()]
        all_reports = []
        for method in methods:
            spec = _eval_spec(cfg, paths, method)
            spec["k"] = max(k_values)
            icfg = replace(_inference_cfg(cfg), k=max(k_values))
            full, results = _benchmark_pooled(
                spec, instances, icfg, cfg.seed, method, _model_ids(spec),
                cfg.workers, keep_results=True)
            reports = [derive_report_at_k(full, results, instances, k)
                       for k in k_values]
            sweep = SweepResult("k", k_values, reports)
            out = paths.reports / f"sweep_k_{_method_slug(method)}.json"
            emit_report(sweep, out, "structured")
            all_reports.extend(reports)
            for rep in reports:
                print(f"{method}@{rep.k}: GRR {rep.grr:.3f} BTR {rep.btr:.3f}")
        emit_report(SweepResult("k", k_values * len(methods), all_reports),
                    paths.reports / "sweep_k.csv", "csv")
    elif axis == "tau":
        tau_values = [float(v) for v in cfg.tau_values.split(",")]
        if any(t <= 0 for t in tau_values):
            raise ConfigError("temperatures must be positive")
        method = cfg.tau_sweep_method
        reports = []
        diversity = {}
        probe_instances = instances[: cfg.probe_instances]
        for tau in tau_values:
            spec = _eval_spec(cfg, paths, method, tau=tau)
            icfg = _inference_cfg(cfg, tau=tau)
            reports.append(_benchmark_pooled(
                spec, instances, icfg, cfg.seed, method, _model_ids(spec),
                cfg.workers))
            tasks = [(i, inst.initial.text(), inst.goal.text(),
                      cfg.probe_rollouts, cfg.probe_steps)
                     for i, inst in enumerate(probe_instances)]
            counts = [c for _, c in _pooled(spec, _probe_task, tasks,
                                            cfg.workers)]
            diversity[str(tau)] = {
                "mean_distinct_rollouts": float(np.mean(counts)),
                "rollouts_per_instance": cfg.probe_rollouts,
                "probe_steps": cfg.probe_steps,
                "instances": len(counts),
            }
            print(f"{method} tau={tau}: GRR {reports[-1].grr:.3f} "
                  f"BTR {reports[-1].btr:.3f} mean distinct rollouts "
                  f"{diversity[str(tau)]['mean_distinct_rollouts']:.2f}")
        sweep = SweepResult("tau", tau_values, reports,
                            {"diversity": diversity})
        emit_report(sweep, paths.reports / f"sweep_tau_{_method_slug(method)}.json",
                    "structured")
        emit_report(sweep, paths.reports / "sweep_tau.csv", "csv")
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")


def cmd_replay_fixture() -> None:
    n = replay_reference_plan()
    print(f"replayed {n}/{n} reference transitions byte-exactly")


# ---------------------------------------------------------------------------
# argparse wiring
# ---------------------------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            parser.add_argument(flag, action=argparse.BooleanOptionalAction,
                                default=None)
        elif f.type in ("int", "Optional[int]"):
            parser.add_argument(flag, type=int, default=None)
        elif f.type in ("float", "Optional[float]"):
            parser.add_argument(flag, type=float, default=None)
        else:
            parser.add_argument(flag, type=str, default=None)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planver",
        description="verifier-gated plan generation on Blocksworld")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("gen-data", "generate trajectory/transition/verifier corpora and "
                     "test instances"),
        ("train-gen", "train the transition generator"),
        ("train-ver", "train a verifier (--verifier-init from_generator|fresh)"),
        ("eval", "evaluate a planner on the test instances"),
        ("sweep", "sweep over attempts (k) or temperature (tau)"),
        ("replay-fixture", "replay the bundled reference plan"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == "eval":
            p.add_argument("--method", choices=["gen", "gen+ver", "gen+oracle"],
                           default="gen+ver")
        if name == "sweep":
            p.add_argument("--axis", choices=["k", "tau"], required=True)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "replay-fixture":
            cmd_replay_fixture()
            return 0
        cfg = build_config(args)
        if args.command == "gen-data":
            cmd_gen_data(cfg)
        elif args.command == "train-gen":
            cmd_train_gen(cfg)
        elif args.command == "train-ver":
            cmd_train_ver(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, args.method)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.axis)
        return 0
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, FixtureMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
