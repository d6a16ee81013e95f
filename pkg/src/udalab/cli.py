"""Experiment runner: config parsing, pipelines, reports and figures.

Subcommands:
  run    one scenario -> train -> evaluate -> bound pipeline
  sweep  repeat `run` over a parameter grid and seed list
  bound  bound calculator plus the two monotonicity scans
  check  quick built-in invariant suite

Reports are deterministic given the config (timestamps never enter numeric
files); figures are rendered next to them.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import figures
from .bound import (VARY_COMMON_CLASSES, VARY_TARGET_CLASSES, BoundInputs,
                    bound_decomposition, complexity_term, default_vc_dim, lambda_oracle,
                    property_scan, proxy_divergence)
from .evaluation import collect_weight_groups, infer_batch, uda_accuracy
from .mlp import init_mlp, SOFTMAX, cross_entropy, mlp_forward, mlp_backward, \
    finite_diff_gradient, max_relative_error, grl_scale, sgd_step, zero_grads
from .report import (dataset_to_csv, eval_report_to_json, register_to_json,
                     save_model, scan_to_csv, trace_to_csv, weight_groups_to_csv,
                     write_csv, write_json)
from .scenario import (LabelSets, ScenarioConfig, build_scenario, jaccard_index,
                       xi_from_fractions)
from .trainer import (MODES, TrainConfig, extract_features, fit, resolve_w0,
                      source_error)
from .weighting import (MarginRegister, NormalizationConfig, WeightBatch,
                        batch_margin_vector, normalize_weights, tmr_update)


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration content."""


@dataclass
class SweepConfig:
    parameter: str           # dotted field path, e.g. "scenario.num_target_private"
    values: list
    seeds: list[int] = field(default_factory=lambda: [0])


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_threshold: float = 0.5
    bound: dict = field(default_factory=dict)
    sweep: SweepConfig | None = None
    output_dir: str = "out"
    seed: int = 0

    def validate(self) -> None:
        self.scenario.validate()
        self.train.validate()
        if not 0.0 <= self.eval_threshold < 1.0:
            raise ConfigError("eval_threshold must lie in [0, 1)")
        unknown = set(self.bound) - {f.name for f in fields(BoundInputs)}
        if unknown:
            raise ConfigError(f"unknown bound override {sorted(unknown)[0]!r}")
        if self.sweep is not None:
            _resolve_sweep_field(self, self.sweep.parameter)
            if not self.sweep.values:
                raise ConfigError("sweep.values must be nonempty")
            if not self.sweep.seeds:
                raise ConfigError("sweep.seeds must be nonempty")


_SECTION_TYPES = {"scenario": ScenarioConfig, "train": TrainConfig, "sweep": SweepConfig}


def _build_section(cls, data: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")
    if cls is ScenarioConfig and "translation" in data:
        data = dict(data, translation=tuple(data["translation"]))
    if cls is TrainConfig and "feature_widths" in data:
        data = dict(data, feature_widths=tuple(data["feature_widths"]))
    if cls is TrainConfig and "mode" in data and data["mode"] not in MODES:
        raise ConfigError(f"unknown mode {data['mode']!r}; expected one of {MODES}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} section: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse a JSON experiment document; unknown keys are rejected by name.

    A seed omitted from the scenario or train section inherits the top-level
    experiment seed.
    """
    if not text.strip():
        raw: dict = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    top_allowed = {f.name for f in fields(ExperimentConfig)}
    for key in raw:
        if key not in top_allowed:
            raise ConfigError(f"unknown key {key!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    scen_data = dict(raw.get("scenario", {}))
    train_data = dict(raw.get("train", {}))
    scen_data.setdefault("seed", seed)
    train_data.setdefault("seed", seed)
    scenario = _build_section(ScenarioConfig, scen_data, "scenario")
    train = _build_section(TrainConfig, train_data, "train")
    sweep = None
    if "sweep" in raw:
        sweep = _build_section(SweepConfig, dict(raw["sweep"]), "sweep")
    config = ExperimentConfig(
        scenario=scenario, train=train,
        eval_threshold=raw.get("eval_threshold", 0.5),
        bound=dict(raw.get("bound", {})),
        sweep=sweep,
        output_dir=raw.get("output_dir", "out"),
        seed=seed)
    try:
        config.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def emit_config(config: ExperimentConfig) -> str:
    """Serialize a config so that parse_config(emit_config(c)) == c."""
    payload = asdict(config)
    payload["scenario"]["translation"] = list(config.scenario.translation)
    payload["train"]["feature_widths"] = list(config.train.feature_widths)
    if config.sweep is None:
        payload.pop("sweep")
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _resolve_sweep_field(config: ExperimentConfig, dotted: str):
    obj = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not hasattr(obj, part):
            raise ConfigError(f"sweep parameter {dotted!r} does not name a config field")
        obj = getattr(obj, part)
    if not hasattr(obj, parts[-1]):
        raise ConfigError(f"sweep parameter {dotted!r} does not name a config field")
    return obj, parts[-1]


def _resolve_bound_inputs(config, model, register, source, target,
                          label_sets: LabelSets, final_source_error: float):
    """Assemble bound inputs from the trained run, honoring overrides; returns
    None when the scenario has no common classes to bound."""
    common = list(label_sets.common)
    if not common or not label_sets.target_classes:
        return None
    alpha = len(common) / len(label_sets.source_classes)
    gamma = len(label_sets.source_classes) / len(label_sets.target_classes)
    m = min(len(source), len(target))
    overrides = config.bound
    values = {
        "vc_dim": default_vc_dim(model.domain_classifier.num_parameters()),
        "gamma": gamma,
        "m_prime": alpha * m,
        "delta": 0.05,
        "source_risk": final_source_error,
    }
    if "empirical_divergence" not in overrides:
        src_mask = np.isin(source.labels, common)
        tgt_mask = np.isin(target.labels, common)
        zs = extract_features(model, source.features[src_mask])
        zt = extract_features(model, target.features[tgt_mask])
        values["empirical_divergence"] = proxy_divergence(zs, zt, seed=config.seed)
    if "joint_risk" not in overrides:
        values["joint_risk"] = lambda_oracle(source, target, seed=config.seed)
    values.update(overrides)
    return BoundInputs(**values)


def run_experiment(config: ExperimentConfig) -> list[str]:
    """Execute one pipeline; returns the list of files written."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    source, target, label_sets = build_scenario(config.scenario)
    model, register, trace = fit(source, target, config.train)

    predictions = infer_batch(model, target.features, config.eval_threshold)
    report = uda_accuracy(predictions, target.labels, label_sets, config.eval_threshold)
    w0 = resolve_w0(config.train, label_sets)
    groups = collect_weight_groups(model, register, source, target, w0)
    report.group_weight_stats = {k: v.tolist() for k, v in groups.items()}
    err = source_error(model, source.features, source.labels)

    written = []

    def _emit(name: str, writer, *args) -> None:
        path = out / name
        writer(*args, path)
        written.append(str(path))

    _emit("trace.csv", trace_to_csv, trace)
    _emit("eval_report.json", eval_report_to_json, report)
    _emit("weight_groups.csv", weight_groups_to_csv, groups)
    _emit("register.json", register_to_json, register)
    bound_inputs = _resolve_bound_inputs(config, model, register, source, target,
                                         label_sets, err)
    if bound_inputs is not None:
        decomposition = bound_decomposition(bound_inputs)
        payload = {"inputs": asdict(bound_inputs), "decomposition": decomposition}
        _emit("bound.json", lambda obj, path: write_json(path, obj), payload)
    _emit("model.json", save_model, model)
    _emit("config.json", lambda text, path: Path(path).write_text(text),
          emit_config(config))
    _emit("source.csv", dataset_to_csv, source)
    _emit("target.csv", dataset_to_csv, target)

    _emit("weight_density.png", figures.save_weight_density, groups)
    _emit("training_curves.png", figures.save_training_curves, trace)
    _emit("register.png", figures.save_register_profile, register, label_sets)
    return written


def run_sweep(config: ExperimentConfig) -> list[str]:
    """Run the configured sweep; emits sweep_summary.csv plus a figure."""
    if config.sweep is None:
        raise ConfigError("config has no sweep section")
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    accs_by_value: dict = {}
    for value in config.sweep.values:
        for seed in config.sweep.seeds:
            sub = replace(config,
                          scenario=replace(config.scenario, seed=seed),
                          train=replace(config.train, seed=seed),
                          sweep=None, seed=seed)
            holder, name = _resolve_sweep_field(sub, config.sweep.parameter)
            setattr(holder, name, value)
            sub.validate()
            source, target, label_sets = build_scenario(sub.scenario)
            model, register, _ = fit(source, target, sub.train)
            preds = infer_batch(model, target.features, sub.eval_threshold)
            report = uda_accuracy(preds, target.labels, label_sets, sub.eval_threshold)
            rows.append((config.sweep.parameter, value, seed, report.averaged_accuracy))
            accs_by_value.setdefault(value, []).append(report.averaged_accuracy)
    summary = out / "sweep_summary.csv"
    write_csv(summary, ["parameter", "value", "seed", "averaged_accuracy"], rows)
    fig = out / "sweep_summary.png"
    figures.save_sweep_curve(list(config.sweep.values), accs_by_value, fig,
                             config.sweep.parameter)
    return [str(summary), str(fig)]


def run_bound(config: ExperimentConfig) -> list[str]:
    """Calculator-only path: bound decomposition plus both property scans."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    defaults = {"vc_dim": 3, "gamma": 1.0, "m_prime": 24.0, "delta": 0.05,
                "source_risk": 0.05, "empirical_divergence": 0.4, "joint_risk": 0.1}
    defaults.update(config.bound)
    inputs = BoundInputs(**defaults)
    decomposition = bound_decomposition(inputs)
    written = []
    bound_path = out / "bound.json"
    write_json(bound_path, {"inputs": asdict(inputs), "decomposition": decomposition})
    written.append(str(bound_path))

    scan1 = property_scan(inputs.vc_dim, inputs.delta, 36.0, VARY_TARGET_CLASSES,
                          [10, 13, 15, 20, 25, 26],
                          num_source_classes=15, num_common=10)
    path1 = out / "scan_target_classes.csv"
    scan_to_csv(scan1, path1)
    figures.save_scan_curve(scan1, "target class count", out / "scan_target_classes.png")
    written += [str(path1), str(out / "scan_target_classes.png")]

    scan2 = property_scan(inputs.vc_dim, inputs.delta, 36.0, VARY_COMMON_CLASSES,
                          [0.2, 0.4, 0.6, 0.8, 1.0], gamma=1.0)
    path2 = out / "scan_common_fraction.csv"
    scan_to_csv(scan2, path2)
    figures.save_scan_curve(scan2, "common-class fraction", out / "scan_common_fraction.png")
    written += [str(path2), str(out / "scan_common_fraction.png")]
    return written


def run_check(seed: int = 0) -> int:
    """Lightweight invariant suite; prints one line per check."""
    rng = np.random.default_rng(seed)
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
        failures += 0 if ok else 1

    worst = 0.0
    for _ in range(3):
        net = init_mlp([3, 6, 4], SOFTMAX, rng)
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 4, size=5)
        cache, probs = mlp_forward(net, x)
        _, d_logits = cross_entropy(probs, y)
        analytic, _ = mlp_backward(net, cache, d_logits)

        def loss(p):
            _, pr = mlp_forward(p, x)
            return cross_entropy(pr, y)[0]

        worst = max(worst, max_relative_error(analytic, finite_diff_gradient(loss, net)))
    check(f"gradient check (max rel err {worst:.2e})", worst < 1e-4)

    g = zero_grads(init_mlp([4, 2], SOFTMAX, rng))
    g.layers[0].weight[:] = rng.normal(size=(4, 2))
    flipped = grl_scale(g, 0.5)
    check("gradient reversal scaling",
          np.array_equal(flipped.layers[0].weight, -0.5 * g.layers[0].weight))

    reg = MarginRegister(4)
    history = []
    for _ in range(200):
        batch = rng.uniform(0, 1, size=4)
        history.append(batch)
        reg = tmr_update(reg, batch)
    check("register equals brute-force mean",
          bool(np.allclose(reg.vector, np.mean(history, axis=0), atol=1e-12)))

    ok_norm = True
    for _ in range(200):
        w = rng.normal(size=rng.integers(2, 30))
        nw = normalize_weights(WeightBatch(w, "source"), NormalizationConfig(0))
        ok_norm &= bool(np.all(nw.values >= 0))
        if w.max() > w.min():
            ok_norm &= abs(nw.values.mean() - 1.0) < 1e-9
    check("weight normalization invariants", ok_norm)

    ok_xi = True
    for _ in range(1000):
        c = int(rng.integers(1, 15))
        sp = int(rng.integers(0, 15))
        tp = int(rng.integers(0, 15))
        ls = LabelSets.from_counts(c, sp, tp)
        ok_xi &= xi_from_fractions(c / (c + sp), c / (c + tp)) == jaccard_index(ls)
    check("label overlap consistency", ok_xi)

    params = init_mlp([3, 2], SOFTMAX, rng)
    before = params.copy()
    sgd_step(params, zero_grads(params), 0.0)
    check("sgd with lr=0 is identity",
          all(np.array_equal(a.weight, b.weight) for a, b in
              zip(before.layers, params.layers)))

    ok_ct = complexity_term(2, 0.5, 36.0, 0.05) == complexity_term(2, 1.0, 36.0, 0.05)
    check("complexity term depends on gamma only via max(1, gamma)", ok_ct)

    print(f"{7 - failures}/7 checks passed")
    return 1 if failures else 0


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    return parse_config(Path(path).read_text())


def _apply_flags(config: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
        config.scenario = replace(config.scenario, seed=args.seed)
        config.train = replace(config.train, seed=args.seed)
    if getattr(args, "mode", None) is not None:
        config.train = replace(config.train, mode=args.mode)
    if getattr(args, "out", None) is not None:
        config.output_dir = args.out
    if getattr(args, "threshold", None) is not None:
        config.eval_threshold = args.threshold
    if getattr(args, "w0", None) is not None:
        config.train = replace(config.train, w0=args.w0)
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udalab",
                                     description="universal domain adaptation lab")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON experiment config")
    common.add_argument("--seed", type=int, help="experiment seed")
    common.add_argument("--mode", choices=MODES, help="training mode")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threshold", type=float, help="unknown-rejection threshold")
    common.add_argument("--w0", type=int, choices=(0, 1), help="activation threshold")
    sub.add_parser("run", parents=[common], help="run one experiment")
    sub.add_parser("sweep", parents=[common], help="run the configured sweep")
    sub.add_parser("bound", parents=[common], help="bound calculator and scans")
    check_p = sub.add_parser("check", help="run the invariant suite")
    check_p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return run_check(args.seed or 0)
        config = _apply_flags(_load_config(args.config), args)
        if args.command == "run":
            written = run_experiment(config)
        elif args.command == "sweep":
            written = run_sweep(config)
        else:
            written = run_bound(config)
        for path in written:
            print(path)
        return 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
