"""Command-line driver.

    graphcf sweep   --config run.yaml
    graphcf learn   --config run.yaml [--seed N]
    graphcf predict --config run.yaml --user U --item I --mode user|item
    graphcf report  --in report.csv --format table|csv

Every output file is written to a temporary sibling and renamed into place,
so a failed run leaves no partial artifacts.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError, GraphCFError, UnknownId
from .evalbench import EvalReport, emit_report, learn_and_evaluate, parse_report, run_knn_sweep
from .graph import format_graph, load_graph
from .ingest import parse_movielens, split_train_test, to_matrix
from .learn import LearnConfig, canonical_metric
from .predict import predict_item_based, predict_user_based, query_config

log = logging.getLogger("graphcf")


@dataclass
class RunConfig:
    data_path: str
    test_fraction: float = 0.2
    seed: int = 42
    metric: str = "cosine"
    learn: LearnConfig = field(default_factory=LearnConfig)
    k_values: tuple = tuple(range(2, 11))
    report: str = "report.csv"
    graph: str = "learned_graph.txt"
    base_graph: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in [0, 1)")
        try:
            self.metric = canonical_metric(self.metric)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.k_values = tuple(int(k) for k in self.k_values)
        if not self.k_values or min(self.k_values) < 1:
            raise ConfigError("k_values must be positive integers")

    @property
    def config_echo(self) -> Path:
        rep = Path(self.report)
        return rep.with_name(rep.stem + ".config.yaml")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_values"] = list(self.k_values)
        return d


def load_config(path, seed=None) -> RunConfig:
    """Read a YAML run config; relative paths resolve against its folder."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "data_path" not in raw:
        raise ConfigError("config needs data_path")
    learn_raw = raw.pop("learn", None) or {}
    learn_known = {f.name for f in fields(LearnConfig)}
    if set(learn_raw) - learn_known:
        raise ConfigError(f"unknown learn keys: {sorted(set(learn_raw) - learn_known)}")
    learn_raw.setdefault("metric", raw.get("metric", "cosine"))
    if seed is not None:
        raw["seed"] = seed
        learn_raw["seed"] = seed
    try:
        learn = LearnConfig(**learn_raw)
        cfg = RunConfig(learn=learn, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    base = path.parent
    for name in ("data_path", "report", "graph", "base_graph"):
        value = getattr(cfg, name)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg, name, str(base / value))
    return cfg


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load_splits(cfg: RunConfig):
    path = Path(cfg.data_path)
    if path.is_dir():
        path = path / "u.data"
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    ds = parse_movielens(path)
    return split_train_test(ds, cfg.test_fraction, cfg.seed)


def _echo(cfg: RunConfig):
    _atomic_write(cfg.config_echo, yaml.safe_dump(cfg.to_dict(), sort_keys=True))


def cmd_sweep(cfg: RunConfig) -> EvalReport:
    train, test = _load_splits(cfg)
    report = run_knn_sweep(train, test, cfg.k_values, cfg.metric)
    _atomic_write(cfg.report, emit_report(report, "csv"))
    _echo(cfg)
    print(emit_report(report, "table"), end="")
    return report


def cmd_learn(cfg: RunConfig) -> EvalReport:
    train, test = _load_splits(cfg)
    row, result = learn_and_evaluate(train, test, cfg.learn)
    report_path = Path(cfg.report)
    report = parse_report(report_path.read_text()) if report_path.exists() else EvalReport()
    report.rows.append(row)
    # graph files first: a report row must never point at a graph that was not written
    _atomic_write(cfg.graph, format_graph(result.graph))
    if cfg.base_graph:
        _atomic_write(cfg.base_graph, format_graph(result.base))
    _atomic_write(cfg.report, emit_report(report, "csv"))
    _echo(cfg)
    print(emit_report(EvalReport([row]), "table"), end="")
    return report


def _resolve_ids(meta, user_id, item_id):
    if user_id not in meta.user_index:
        raise UnknownId(f"unknown user id {user_id}")
    if item_id not in meta.item_index:
        raise UnknownId(f"unknown item id {item_id}")
    return meta.user_index[user_id], meta.item_index[item_id]


def cmd_predict(cfg: RunConfig, user_id: int, item_id: int, mode: str):
    train, _ = _load_splits(cfg)
    m = to_matrix(train)
    q = _resolve_ids(m.meta, user_id, item_id)
    if mode == "user":
        if not Path(cfg.graph).exists():
            raise FileNotFoundError(f"learned graph not found: {cfg.graph} (run `learn` first)")
        pred = predict_user_based(load_graph(cfg.graph), m, q)
    elif mode == "item":
        pred = predict_item_based(m, q, query_config(cfg.learn))
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    print(f"value={pred.value:.4f} source={pred.source} neighbors={pred.contributing_neighbors}")
    return pred


def cmd_report(path, fmt):
    text = Path(path).read_text()
    out = emit_report(parse_report(text), fmt)
    print(out, end="")
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="graphcf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="kNN baseline over k_values")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("learn", help="learn a sparse user graph and evaluate it")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("predict", help="predict one rating")
    p.add_argument("--config", required=True)
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--item", type=int, required=True)
    p.add_argument("--mode", choices=("user", "item"), default="user")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("report", help="re-render a CSV report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            cmd_report(args.input, args.format)
            return 0
        cfg = load_config(args.config, seed=args.seed)
        if args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "learn":
            cmd_learn(cfg)
        else:
            cmd_predict(cfg, args.user, args.item, args.mode)
    except (GraphCFError, OSError, ValueError) as exc:
        print(f"graphcf {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
