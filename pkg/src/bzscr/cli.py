"""Command-line entry point: ``bzscr {synth,train,eval,sweep}``.

Every run is a pure function of its flags, config file, input files and seed.
The merged configuration is written to ``<out>/effective_config.json``.
"""
from __future__ import annotations

import argparse
import copy
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .boosting import SolverSettings
from .data import (
    SyntheticSpec,
    cosine_divergence,
    generate_synthetic,
    load_dataset,
    load_samples,
    path_divergence,
    save_dataset,
    save_samples,
)
from .errors import BZSCRError, LoadError
from .scoring import load_model, save_model
from .selection import PaceParams
from .trainer import (
    TrainConfig,
    evaluate,
    sweep_beta,
    train,
    write_report_json,
    write_sweep_csv,
    write_trace_csv,
)

log = logging.getLogger("bzscr")

SCHEMA_VERSION = 1
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_STRICT = 3


def _dataclass_defaults(cls):
    return {f.name: getattr(cls(), f.name) for f in dataclasses.fields(cls)}


def default_config() -> dict:
    base = TrainConfig()
    pace = _dataclass_defaults(PaceParams)
    # JSON has no infinity; null means "no cap"
    pace["lambda_max"] = None if math.isinf(pace["lambda_max"]) else pace["lambda_max"]
    spec = SyntheticSpec()
    return {
        "schema_version": SCHEMA_VERSION,
        "data": None,
        "out": None,
        "model": None,
        "test": None,
        "divergence": "cosine",
        "path_matrix": None,
        "nu_over_n": base.nu_over_n,
        "beta_over_n": base.beta_over_n,
        "t_es": base.t_es,
        "max_iters_outer": base.max_iters_outer,
        "seed": base.seed,
        "strict": False,
        "beta_grid": [0.0, 0.1, 0.2, 0.3, 0.4],
        "pace": pace,
        "solver": _dataclass_defaults(SolverSettings),
        "synth": {
            "classes": spec.n_classes,
            "seen": spec.n_seen,
            "dim": spec.embed_dim,
            "feat": spec.feature_dim,
            "per_class": spec.samples_per_class,
            "noise": spec.noise_scale,
        },
    }


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_PATH = {"type": ["string", "null"]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


CONFIG_SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "data": _PATH,
    "out": _PATH,
    "model": _PATH,
    "test": _PATH,
    "divergence": {"enum": ["cosine", "path", "file"]},
    "path_matrix": _PATH,
    "nu_over_n": _NUM,
    "beta_over_n": _NUM,
    "t_es": _INT,
    "max_iters_outer": _INT,
    "seed": _INT,
    "strict": {"type": "boolean"},
    "beta_grid": {"type": "array", "items": _NUM, "minItems": 1},
    "pace": _obj({
        "lam": _NUM, "zeta": _NUM, "lambda_max": {"type": ["number", "null"]}, "mu": _NUM,
        "mode": {"enum": ["geometric", "quantile"]}, "p0": _NUM, "p_step": _NUM,
    }),
    "solver": _obj({name: (_INT if isinstance(v, int) else _NUM)
                    for name, v in _dataclass_defaults(SolverSettings).items()}),
    "synth": _obj({"classes": _INT, "seen": _INT, "dim": _INT, "feat": _INT,
                   "per_class": _INT, "noise": _NUM}),
}, required=["schema_version"])


class ConfigError(BZSCRError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _validate(doc: dict, source: str):
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: {where}: {exc.message}") from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# (flag, config path, argparse kwargs)
_COMMON = [
    ("--data", ("data",), dict(help="dataset directory")),
    ("--out", ("out",), dict(help="output directory")),
    ("--seed", ("seed",), dict(type=int, help="random seed")),
]
_TRAIN = [
    ("--divergence", ("divergence",), dict(choices=["cosine", "path", "file"],
                                            help="source of the class divergence")),
    ("--path-matrix", ("path_matrix",), dict(help="CSV of shortest-path lengths (divergence=path)")),
    ("--nu-over-n", ("nu_over_n",), dict(type=float)),
    ("--beta-over-n", ("beta_over_n",), dict(type=float)),
    ("--t-es", ("t_es",), dict(type=int, help="early-stopping patience")),
    ("--max-iters-outer", ("max_iters_outer",), dict(type=int)),
    ("--lambda", ("pace", "lam"), dict(type=float, dest="pace_lam")),
    ("--zeta", ("pace", "zeta"), dict(type=float)),
    ("--lambda-max", ("pace", "lambda_max"), dict(type=float)),
    ("--mu", ("pace", "mu"), dict(type=float)),
    ("--pace-mode", ("pace", "mode"), dict(choices=["geometric", "quantile"])),
    ("--p0", ("pace", "p0"), dict(type=float)),
    ("--p-step", ("pace", "p_step"), dict(type=float)),
    ("--epsilon", ("solver", "epsilon"), dict(type=float)),
    ("--grad-tol", ("solver", "grad_tol"), dict(type=float)),
    ("--solver-max-iters", ("solver", "max_iters"), dict(type=int)),
    ("--strict", ("strict",), dict(action="store_const", const=True,
                                   help="exit with status 3 if an inner solve fails to converge")),
]
_SYNTH = [
    ("--classes", ("synth", "classes"), dict(type=int)),
    ("--seen", ("synth", "seen"), dict(type=int)),
    ("--dim", ("synth", "dim"), dict(type=int, help="embedding dimension")),
    ("--feat", ("synth", "feat"), dict(type=int, help="feature dimension")),
    ("--per-class", ("synth", "per_class"), dict(type=int)),
    ("--noise", ("synth", "noise"), dict(type=float)),
]
_MODEL = [("--model", ("model",), dict(help="model.json (default: <out>/model.json)"))]
_TEST = [("--test", ("test",), dict(help="test sample directory (default: <data>/test)"))]
_GRID = [("--beta-grid", ("beta_grid",), dict(type=_float_list, help="comma-separated beta/N values"))]

_COMMAND_FLAGS = {
    "synth": _COMMON + _SYNTH,
    "train": _COMMON + _TRAIN,
    "eval": _COMMON + _TRAIN[:2] + _MODEL + _TEST,
    "sweep": _COMMON + _TRAIN + _TEST + _GRID,
}


def _dest(flag, kw):
    return kw.get("dest", flag.lstrip("-").replace("-", "_"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bzscr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "generate a synthetic zero-shot dataset",
        "train": "train an ensemble; writes model.json and trace.csv",
        "eval": "evaluate a model on unseen-class test data; writes report.json",
        "sweep": "train and evaluate over a beta/N grid; writes sweep.csv",
    }
    for name, flags in _COMMAND_FLAGS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for flag, _, kw in flags:
            p.add_argument(flag, default=None, **kw)
    return parser


def resolve_config(args) -> dict:
    """Defaults, then the config file, then explicit flags; validated at each layer."""
    cfg = default_config()
    if args.config:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise LoadError("config file not found", path) from None
        except json.JSONDecodeError as exc:
            raise LoadError(f"invalid JSON ({exc.msg})", path, exc.lineno - 1, exc.colno - 1) from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        _validate(doc, str(path))
        cfg = _merge(cfg, doc)
    for flag, keys, kw in _COMMAND_FLAGS[args.command]:
        value = getattr(args, _dest(flag, kw))
        if value is None:
            continue
        node = cfg
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    _validate(cfg, "effective config")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    pace = dict(cfg["pace"])
    if pace["lambda_max"] is None:
        pace["lambda_max"] = math.inf
    return TrainConfig(
        nu_over_n=cfg["nu_over_n"],
        beta_over_n=cfg["beta_over_n"],
        pace=PaceParams(**pace),
        settings=SolverSettings(**cfg["solver"]),
        t_es=cfg["t_es"],
        max_iters_outer=cfg["max_iters_outer"],
        seed=cfg["seed"],
    )


def _require(cfg, key, flag):
    if not cfg.get(key):
        raise ConfigError(f"{flag} is required (or set {key!r} in the config file)")
    return Path(cfg[key])


def _out_dir(cfg) -> Path:
    out = _require(cfg, "out", "--out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_effective(out: Path, cfg: dict):
    (out / "effective_config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _load_path_matrix(path: Path):
    if not path.exists():
        raise LoadError("file not found", path)
    try:
        P = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise LoadError(f"cannot parse path matrix ({exc})", path) from None
    return path_divergence(P)


def _divergence(cfg, E, stored):
    source = cfg["divergence"]
    if source == "cosine":
        return cosine_divergence(E)
    if source == "file":
        if stored is None:
            raise LoadError("divergence=file but the dataset has no delta.csv",
                            Path(cfg["data"]) / "delta.csv")
        return stored
    D = _load_path_matrix(_require(cfg, "path_matrix", "--path-matrix"))
    if D.class_count != E.class_count:
        raise ConfigError(f"path matrix has {D.class_count} classes, embeddings have {E.class_count}")
    return D


def _load_inputs(cfg):
    data_dir = _require(cfg, "data", "--data")
    data, E, split, stored = load_dataset(data_dir)
    return data, E, split, _divergence(cfg, E, stored)


def _load_test(cfg, E, split, data):
    test_dir = Path(cfg["test"]) if cfg.get("test") else Path(cfg["data"]) / "test"
    return load_samples(test_dir, E.class_count, allowed=split.unseen, feature_dim=data.feature_dim)


def cmd_synth(cfg) -> int:
    s = cfg["synth"]
    spec = SyntheticSpec(n_classes=s["classes"], n_seen=s["seen"], embed_dim=s["dim"],
                         feature_dim=s["feat"], samples_per_class=s["per_class"],
                         noise_scale=s["noise"])
    out = _out_dir(cfg)
    train_ds, test_ds, E, split = generate_synthetic(spec, cfg["seed"])
    save_dataset(out, train_ds, E, split, cosine_divergence(E))
    save_samples(out / "test", test_ds)
    _write_effective(out, cfg)
    print(f"wrote {train_ds.n_samples} training and {test_ds.n_samples} test samples to {out}")
    return 0


def cmd_train(cfg) -> int:
    data, E, split, D = _load_inputs(cfg)
    out = _out_dir(cfg)
    _write_effective(out, cfg)
    ens, trace = train(data, E, split, D, train_config(cfg))
    save_model(out / "model.json", ens)
    write_trace_csv(out / "trace.csv", trace)
    best = trace.records[trace.best_iter - 1].val_er if trace.records else float("nan")
    print(f"{len(trace)} iterations ({trace.stop_reason}); kept K={len(ens)} "
          f"with validation error {best:.4f}")
    if cfg["strict"]:
        bad = [r.iter for r in trace.records if not r.w_converged]
        if bad:
            print(f"strict: weight solve did not converge at iterations {bad}", file=sys.stderr)
            return EXIT_STRICT
    return 0


def cmd_eval(cfg) -> int:
    data, E, split, D = _load_inputs(cfg)
    out = _out_dir(cfg)
    model_path = Path(cfg["model"]) if cfg.get("model") else out / "model.json"
    ens = load_model(model_path)
    if ens.feature_dim != data.feature_dim or ens.embed_dim != E.embed_dim:
        raise ConfigError(f"{model_path}: model dimensions ({ens.feature_dim}, {ens.embed_dim}) "
                          f"do not match the data ({data.feature_dim}, {E.embed_dim})")
    test = _load_test(cfg, E, split, data)
    _write_effective(out, cfg)
    report = evaluate(ens, test, E, D, split.unseen)
    write_report_json(out / "report.json", report)
    print(f"error rate {report.error_rate:.4f}, mean divergence {report.mean_delta:.4f}")
    return 0


def cmd_sweep(cfg) -> int:
    data, E, split, D = _load_inputs(cfg)
    test = _load_test(cfg, E, split, data)
    out = _out_dir(cfg)
    _write_effective(out, cfg)
    rows = sweep_beta(train_config(cfg), cfg["beta_grid"], data, E, split, D, test)
    write_sweep_csv(out / "sweep.csv", rows)
    for b, er, md in rows:
        print(f"beta/N={b:g}  error rate {er:.4f}  mean divergence {md:.4f}")
    return 0


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"bzscr {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BZSCRError, OSError) as exc:
        print(f"bzscr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
