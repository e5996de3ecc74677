"""CSV / JSON / checkpoint serialization.

Matrix CSV layout: first line is the header ``rows,cols``; each following
line holds one row of comma-separated values printed with 17 significant
digits (bit-exact float round trip, '.' decimal, no locale). Probability
vectors use the same layout with cols = 1.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List

import numpy as np

from .continuous import CostParameterization, SampleSet, TrainConfig
from .errors import ParseError, ShapeHeaderMismatch
from .nets import FeedForwardNet
from .types import ProbabilityVector, as_matrix

_FMT = "%.17g"


def write_matrix_csv(path, matrix) -> None:
    mat = np.atleast_2d(np.asarray(as_matrix(matrix), dtype=float))
    rows, cols = mat.shape
    lines = [f"{rows},{cols}"]
    for r in range(rows):
        lines.append(",".join(_FMT % x for x in mat[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ParseError("empty file", line=1)
    header = text[0].split(",")
    if len(header) != 2:
        raise ShapeHeaderMismatch(f"expected 'rows,cols' header, got {text[0]!r}")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ShapeHeaderMismatch(f"non-integer header {text[0]!r}") from exc
    if len(text) - 1 != rows:
        raise ShapeHeaderMismatch(
            f"header promises {rows} rows but file has {len(text) - 1}")
    out = np.empty((rows, cols))
    for r, line in enumerate(text[1:], start=2):
        parts = line.split(",")
        if len(parts) != cols:
            raise ParseError(f"row on line {r} has {len(parts)} values, "
                             f"expected {cols}", line=r)
        for k, item in enumerate(parts):
            try:
                out[r - 2, k] = float(item)
            except ValueError as exc:
                raise ParseError(f"bad number {item!r} on line {r}",
                                 line=r, column=k + 1) from exc
    return out


def write_vector_csv(path, vector) -> None:
    if isinstance(vector, ProbabilityVector):
        vec = vector.values
    else:
        vec = np.asarray(vector, dtype=float)
    write_matrix_csv(path, vec.reshape(-1, 1))


def read_vector_csv(path) -> np.ndarray:
    return read_matrix_csv(path).ravel()


def write_pairs_csv(path, samples: SampleSet) -> None:
    """Pairs as a matrix CSV of [x | y] rows; the x-dimension is recorded
    in a trailing header column so the split is self-describing."""
    xs = samples.xs
    ys = samples.ys
    mat = np.concatenate([xs, ys], axis=1)
    rows, cols = mat.shape
    lines = [f"{rows},{cols},{xs.shape[1]}"]
    for r in range(rows):
        lines.append(",".join(_FMT % x for x in mat[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pairs_csv(path) -> SampleSet:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise ParseError("empty file", line=1)
    header = text[0].split(",")
    if len(header) != 3:
        raise ShapeHeaderMismatch(
            f"expected 'rows,cols,dx' header, got {text[0]!r}")
    rows, cols, dx = (int(x) for x in header)
    mat = np.empty((rows, cols))
    if len(text) - 1 != rows:
        raise ShapeHeaderMismatch(
            f"header promises {rows} rows but file has {len(text) - 1}")
    for r, line in enumerate(text[1:], start=2):
        parts = line.split(",")
        if len(parts) != cols:
            raise ParseError(f"row on line {r} has {len(parts)} values, "
                             f"expected {cols}", line=r)
        mat[r - 2] = [float(x) for x in parts]
    return SampleSet(xs=mat[:, :dx], ys=mat[:, dx:])


def write_checkpoint(path, cost: CostParameterization, config: TrainConfig,
                     alpha_net: FeedForwardNet = None,
                     beta_net: FeedForwardNet = None) -> None:
    """Self-describing JSON checkpoint: dims, activation tags, flattened
    parameters (row-major weights then biases, layer order), train config."""

    def net_blob(net):
        return {
            "layer_dims": list(net.layer_dims),
            "output_activation": net.output_activation,
            "params": [(_FMT % x) for p in net.parameters() for x in p.ravel()],
        }

    blob = {
        "format": "invot-checkpoint-v1",
        "cost": net_blob(cost.net),
        "input_mode": cost.input_mode,
        "scale": cost.scale,
        "train_config": {
            "learning_rate": config.learning_rate,
            "adam_betas": list(config.adam_betas),
            "adam_eps": config.adam_eps,
            "batch_size": config.batch_size,
            "n_collocation": config.n_collocation,
            "epochs": config.epochs,
            "seed": config.seed,
            "domain_box": [list(b) for b in config.domain_box],
            "nominal_epsilon": config.nominal_epsilon,
        },
    }
    if alpha_net is not None:
        blob["alpha"] = net_blob(alpha_net)
    if beta_net is not None:
        blob["beta"] = net_blob(beta_net)
    Path(path).write_text(json.dumps(blob, indent=1))


def _net_from_blob(blob) -> FeedForwardNet:
    dims = blob["layer_dims"]
    flat = np.array([float(x) for x in blob["params"]])
    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    pos = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in))
        pos += fan_out * fan_in
        biases.append(flat[pos:pos + fan_out])
        pos += fan_out
    if pos != flat.size:
        raise ShapeHeaderMismatch("checkpoint parameter count does not match dims")
    return FeedForwardNet(layer_dims=dims, weights=weights, biases=biases,
                          output_activation=blob["output_activation"])


def read_checkpoint(path):
    """Returns (cost_parameterization, train_config, alpha_net, beta_net)."""
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != "invot-checkpoint-v1":
        raise ParseError(f"unknown checkpoint format {blob.get('format')!r}")
    tc = blob["train_config"]
    config = TrainConfig(
        learning_rate=tc["learning_rate"],
        adam_betas=tuple(tc["adam_betas"]),
        adam_eps=tc["adam_eps"],
        batch_size=tc["batch_size"],
        n_collocation=tc["n_collocation"],
        epochs=tc["epochs"],
        seed=tc["seed"],
        domain_box=tuple(tuple(b) for b in tc["domain_box"]),
        nominal_epsilon=tc["nominal_epsilon"],
    )
    cost = CostParameterization(input_mode=blob["input_mode"],
                                net=_net_from_blob(blob["cost"]),
                                scale=blob.get("scale", 1.0))
    alpha_net = _net_from_blob(blob["alpha"]) if "alpha" in blob else None
    beta_net = _net_from_blob(blob["beta"]) if "beta" in blob else None
    return cost, config, alpha_net, beta_net


def write_report_json(path, report, config=None) -> None:
    blob = {
        "iterations": report.iterations,
        "objective_trace": [float(x) for x in np.asarray(report.objective_trace)],
        "rel_err_trace": (None if report.rel_err_trace is None
                          else [float(x) for x in np.asarray(report.rel_err_trace)]),
        "feasibility_residual": float(report.feasibility_residual),
        "converged": bool(report.converged),
        "wall_clock_seconds": float(report.wall_clock_seconds),
        "rng": "numpy-PCG64",
        "extras": {k: _jsonable(v) for k, v in report.extras.items()},
    }
    if config is not None:
        blob["config"] = {k: _jsonable(v) for k, v in vars(config).items()}
    Path(path).write_text(json.dumps(blob, indent=1))


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [float(x) for x in v.ravel()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v
