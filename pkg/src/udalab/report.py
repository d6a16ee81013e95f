"""Deterministic file output: CSV and JSON writers shared by the runner.

Floats in analytic reports are printed with 9 significant digits so repeated
runs diff byte-identically across platforms; model files keep full precision
for exact reload.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .bound import ScanRow
from .evaluation import EvalReport
from .mlp import Layer, MlpParams
from .scenario import Dataset
from .trainer import AdaptationModel, TrainTrace
from .weighting import MarginRegister


def fmt(value) -> str:
    """Render one CSV cell; floats get 9 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return f"{value:.9g}"
    return str(value)


def round9(obj):
    """Recursively round floats to 9 significant digits for JSON output."""
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isnan(f) or math.isinf(f) else float(f"{f:.9g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [round9(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round9(v) for v in obj]
    return obj


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(round9(obj), indent=2, sort_keys=True) + "\n")


def dataset_to_csv(dataset: Dataset, path) -> None:
    d = dataset.features.shape[1]
    header = [f"feature_{i}" for i in range(d)] + ["label", "domain"]
    rows = ([*dataset.features[i]] + [int(dataset.labels[i]), dataset.domain]
            for i in range(len(dataset)))
    write_csv(path, header, rows)


def trace_to_csv(trace: TrainTrace, path) -> None:
    header = ["step", "e_g", "e_d", "source_error", "gate_open",
              "ws_common_mean", "ws_private_mean", "wt_common_mean", "wt_private_mean"]
    rows = ((r.step, r.e_g, r.e_d, r.source_error, r.gate_open,
             r.ws_common_mean, r.ws_private_mean, r.wt_common_mean, r.wt_private_mean)
            for r in trace.records)
    write_csv(path, header, rows)


def weight_groups_to_csv(groups: dict, path) -> None:
    rows = []
    for group in sorted(groups):
        domain = group.split("_")[0]
        for w in groups[group]:
            rows.append((domain, group, float(w)))
    write_csv(path, ["domain", "group", "weight"], rows)


def eval_report_to_json(report: EvalReport, path) -> None:
    payload = {
        "threshold": report.threshold,
        "per_class_accuracy": {str(k): v for k, v in report.per_class_accuracy.items()},
        "per_class_counts": {str(k): v for k, v in report.per_class_counts.items()},
        "averaged_accuracy": report.averaged_accuracy,
    }
    if report.group_weight_stats is not None:
        payload["group_weight_stats"] = {
            k: list(v) for k, v in report.group_weight_stats.items()}
    write_json(path, payload)


def register_to_json(register: MarginRegister, path) -> None:
    write_json(path, {
        "num_classes": register.num_classes,
        "values": register.vector,
        "update_count": register.update_count,
    })


def scan_to_csv(rows: list[ScanRow], path) -> None:
    write_csv(path, ["parameter", "bound", "verdict"],
              ((r.parameter, r.bound, r.verdict) for r in rows))


def _params_to_dict(params: MlpParams) -> dict:
    return {
        "head": params.head,
        "layers": [{
            "activation": l.activation,
            "weight": l.weight.tolist(),
            "bias": l.bias.tolist(),
        } for l in params.layers],
    }


def _params_from_dict(d: dict) -> MlpParams:
    layers = [Layer(np.asarray(l["weight"], dtype=float),
                    np.asarray(l["bias"], dtype=float), l["activation"])
              for l in d["layers"]]
    return MlpParams(layers, d["head"])


def save_model(model: AdaptationModel, path) -> None:
    """Full-precision JSON dump of all network parameters."""
    payload = {
        "feature_extractor": _params_to_dict(model.feature_extractor),
        "classifier": _params_to_dict(model.classifier),
        "domain_classifier": _params_to_dict(model.domain_classifier),
    }
    if model.aux_domain_classifier is not None:
        payload["aux_domain_classifier"] = _params_to_dict(model.aux_domain_classifier)
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_model(path) -> AdaptationModel:
    payload = json.loads(Path(path).read_text())
    aux = payload.get("aux_domain_classifier")
    return AdaptationModel(
        _params_from_dict(payload["feature_extractor"]),
        _params_from_dict(payload["classifier"]),
        _params_from_dict(payload["domain_classifier"]),
        None if aux is None else _params_from_dict(aux))
