"""Command-line entry point.

Subcommands: ``gen-data``, ``train``, ``certify``, ``sweep``, ``oracle-check``
and ``node-demo``.  Options may also come from a JSON file given with
``--config``; explicit flags win.  Every subcommand that writes an output
directory also writes the resolved ``config.json`` there.

Exit codes: 0 success, 1 invalid input or usage, 2 internal failure (this
includes oracle violations).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bitgraph import read_jsonl, write_jsonl
from .datagen import DatasetSpec, generate_sbm, generate_topology_dataset, sbm_features
from .errors import (AbstainRequired, ClassifierFailure, ConfigError, InvalidInput,
                     InvalidParameter, TrainingFailure)
from .gcn import GcnModel, TrainConfig, forward_node, train, train_node
from .dpcert import run_dp_oracle_suite
from .npcert import run_oracle_suite
from .pipeline import (CURVE_COLUMNS, RESULT_COLUMNS, CertifyConfig, certified_accuracy,
                       certify_dataset, certify_node, run_sweep, write_csv, RADII)

log = logging.getLogger("graphcert")

DEFAULTS = {
    "gen-data": {"seed": 0, "out": "data", "per_family": 60, "train_per_family": 40},
    "train": {"seed": 0, "data": "data", "out": "model.json", "epochs": 1000, "lr": 0.5,
              "hidden": 32, "d_max": 16, "noise_beta": None},
    "certify": {"seed": 0, "data": "data", "model": None, "out": "certify-out", "beta": 0.9,
                "alpha": 0.01, "samples": 1000, "l_max": None, "paranoid": False,
                "two_phase": False, "jobs": 1},
    "sweep": {"seed": 0, "data": "data", "model": None, "out": "sweep-out", "kind": "beta",
              "betas": "0.7,0.9,0.99", "alphas": "0.01,0.001,0.0001",
              "sample_counts": "1000,5000,10000", "beta": 0.7, "alpha": 0.01, "samples": 1000,
              "epochs": 1000, "lr": 0.5, "train_seed": 0, "retrain": True, "jobs": 1},
    "oracle-check": {"seed": 0, "max_bits": 12, "max_l": 8, "betas": "0.6,0.7,0.9",
                     "classifiers": 20, "e2e_bits": 8, "out": None},
    "node-demo": {"seed": 0, "out": "node-out", "n_per_block": 10, "blocks": 3, "p_in": 1.0,
                  "p_out": 0.0, "feature_noise": 0.2, "beta": 0.9, "alpha": 0.01,
                  "samples": 1000, "targets": 10, "epochs": 500, "lr": 0.5, "jobs": 1},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphcert", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp, jobs=False):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--seed", type=int, default=S, help="64-bit unsigned seed")
        sp.add_argument("-v", "--verbose", action="store_true")
        if jobs:
            sp.add_argument("--jobs", type=int, default=S, help="worker processes")

    g = sub.add_parser("gen-data", help="generate the 8-family topology dataset")
    common(g)
    g.add_argument("--out", "--out-dir", dest="out", default=S)
    g.add_argument("--per-family", type=int, default=S)
    g.add_argument("--train-per-family", type=int, default=S)

    t = sub.add_parser("train", help="train the graph-level GCN")
    common(t)
    t.add_argument("--data", default=S, help="directory with train.jsonl, or a .jsonl file")
    t.add_argument("--out", default=S, help="model JSON path")
    t.add_argument("--epochs", type=int, default=S)
    t.add_argument("--lr", type=float, default=S)
    t.add_argument("--hidden", type=int, default=S)
    t.add_argument("--d-max", type=int, default=S)
    t.add_argument("--noise-beta", type=float, default=S)

    c = sub.add_parser("certify", help="certify every graph of a dataset")
    common(c, jobs=True)
    c.add_argument("--data", default=S, help="directory with test.jsonl, or a .jsonl file")
    c.add_argument("--model", default=S)
    c.add_argument("--out", default=S)
    c.add_argument("--beta", type=float, default=S)
    c.add_argument("--alpha", type=float, default=S)
    c.add_argument("--samples", type=int, default=S)
    c.add_argument("--l-max", type=int, default=S)
    c.add_argument("--paranoid", action="store_true", default=S)
    c.add_argument("--two-phase", action="store_true", default=S)

    w = sub.add_parser("sweep", help="certified-accuracy curves over beta, alpha or M")
    common(w, jobs=True)
    w.add_argument("--kind", choices=("beta", "alpha", "samples"), default=S)
    w.add_argument("--data", default=S, help="directory with train.jsonl and test.jsonl")
    w.add_argument("--model", default=S, help="fixed model; otherwise one is trained per beta")
    w.add_argument("--out", default=S)
    w.add_argument("--betas", default=S)
    w.add_argument("--alphas", default=S)
    w.add_argument("--sample-counts", default=S)
    w.add_argument("--beta", type=float, default=S)
    w.add_argument("--alpha", type=float, default=S)
    w.add_argument("--samples", type=int, default=S)
    w.add_argument("--epochs", type=int, default=S)
    w.add_argument("--lr", type=float, default=S)
    w.add_argument("--train-seed", type=int, default=S)
    w.add_argument("--no-retrain", dest="retrain", action="store_false", default=S,
                   help="train one noise-free model instead of one per beta")

    o = sub.add_parser("oracle-check", help="run the enumeration oracles, print a JSON report")
    common(o)
    o.add_argument("--max-bits", type=int, default=S)
    o.add_argument("--max-l", type=int, default=S)
    o.add_argument("--betas", default=S)
    o.add_argument("--classifiers", type=int, default=S)
    o.add_argument("--e2e-bits", type=int, default=S)
    o.add_argument("--out", default=S, help="also write the report to this file")

    n = sub.add_parser("node-demo", help="certify node predictions on a stochastic block model")
    common(n, jobs=True)
    n.add_argument("--out", default=S)
    n.add_argument("--n-per-block", type=int, default=S)
    n.add_argument("--blocks", type=int, default=S)
    n.add_argument("--p-in", type=float, default=S)
    n.add_argument("--p-out", type=float, default=S)
    n.add_argument("--feature-noise", type=float, default=S)
    n.add_argument("--beta", type=float, default=S)
    n.add_argument("--alpha", type=float, default=S)
    n.add_argument("--samples", type=int, default=S)
    n.add_argument("--targets", type=int, default=S)
    n.add_argument("--epochs", type=int, default=S)
    n.add_argument("--lr", type=float, default=S)
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        try:
            from_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(from_file) - set(cfg) - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in from_file.items() if k != "command"})
    for key in cfg:
        if key in vars(args):
            cfg[key] = vars(args)[key]
    if not 0 <= int(cfg["seed"]) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if "jobs" in cfg and int(cfg["jobs"]) < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg


def _write_config(out_dir: Path, command: str, cfg: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps({"command": command, **cfg}, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dataset_file(data: str, name: str) -> Path:
    p = Path(data)
    path = p / name if p.is_dir() else p
    if not path.exists():
        raise ConfigError(f"dataset not found: {path}")
    return path


def _load_model(path) -> GcnModel:
    if path is None:
        raise ConfigError("--model is required")
    if not Path(path).exists():
        raise ConfigError(f"model not found: {path}")
    return GcnModel.load(path)


def cmd_gen_data(cfg):
    spec = DatasetSpec(per_family=cfg["per_family"], train_per_family=cfg["train_per_family"],
                       seed=cfg["seed"])
    train_set, test_set = generate_topology_dataset(spec)
    out = Path(cfg["out"])
    _write_config(out, "gen-data", cfg)
    write_jsonl(train_set, out / "train.jsonl")
    write_jsonl(test_set, out / "test.jsonl")
    print(f"wrote {len(train_set)} train / {len(test_set)} test graphs to {out}")


def _train_config(cfg, noise_beta=None, seed_key="seed"):
    return TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], seed=cfg[seed_key],
                       hidden=cfg.get("hidden", 32), d_max=cfg.get("d_max", 16),
                       noise_beta=noise_beta)


def cmd_train(cfg):
    graphs = read_jsonl(_dataset_file(cfg["data"], "train.jsonl"))
    model = train(graphs, _train_config(cfg, cfg["noise_beta"]),
                  num_classes=max(g.label for g in graphs) + 1)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    _write_config(out.parent, "train", cfg)
    print(f"final loss {model.history[-1]:.4f}; model written to {out}")


def cmd_certify(cfg):
    graphs = read_jsonl(_dataset_file(cfg["data"], "test.jsonl"))
    model = _load_model(cfg["model"])
    cc = CertifyConfig(beta=cfg["beta"], alpha=cfg["alpha"], samples=cfg["samples"],
                       seed=cfg["seed"], l_max=cfg["l_max"], paranoid=cfg["paranoid"],
                       two_phase=cfg["two_phase"])
    results = certify_dataset(model, graphs, cc, jobs=cfg["jobs"])
    out = Path(cfg["out"])
    _write_config(out, "certify", cfg)
    write_csv((c.row() for c in results), RESULT_COLUMNS, out / "results.csv")
    rows = [{"sweep_value": repr(float(cc.beta)), "r": r,
             "certified_accuracy": repr(certified_accuracy(results, r))} for r in RADII]
    write_csv(rows, CURVE_COLUMNS, out / "curve.csv")
    abstained = sum(c.abstained for c in results)
    print(f"certified {len(results) - abstained}/{len(results)}; "
          f"CA(0)={certified_accuracy(results, 0):.3f}; results in {out}")


def cmd_sweep(cfg):
    kind = cfg["kind"]
    values = {"beta": _floats(cfg["betas"]), "alpha": _floats(cfg["alphas"]),
              "samples": _ints(cfg["sample_counts"])}[kind]
    test = read_jsonl(_dataset_file(cfg["data"], "test.jsonl"))
    if cfg["model"] is not None:
        provider = _load_model(cfg["model"])
    else:
        train_set = read_jsonl(_dataset_file(cfg["data"], "train.jsonl"))
        k = max(g.label for g in train_set) + 1
        cache = {}

        def provider(beta):
            key = beta if cfg["retrain"] else None
            if key not in cache:
                cache[key] = train(train_set, _train_config(cfg, key, "train_seed"),
                                   num_classes=k)
            return cache[key]

    base = CertifyConfig(beta=cfg["beta"], alpha=cfg["alpha"], samples=cfg["samples"],
                         seed=cfg["seed"])
    res = run_sweep(kind, values, base, test, provider, jobs=cfg["jobs"])
    out = Path(cfg["out"])
    _write_config(out, "sweep", cfg)
    write_csv(res.curve_rows(), CURVE_COLUMNS, out / "curves.csv")
    write_csv(res.result_rows(), RESULT_COLUMNS, out / "results.csv")
    for v in values:
        print(f"{kind}={v}: CA(0)={res.curves[v][0]:.3f} max radius {res.max_radius(v)} "
              f"({res.wall_s[v]:.1f}s)")


def cmd_oracle_check(cfg):
    report = run_oracle_suite(max_bits=cfg["max_bits"], betas=tuple(_floats(cfg["betas"])),
                              max_l=cfg["max_l"], seed=cfg["seed"],
                              e2e_classifiers=cfg["classifiers"],
                              e2e_bits=min(cfg["e2e_bits"], cfg["max_bits"]))
    dp = run_dp_oracle_suite(betas=tuple(_floats(cfg["betas"])), n_bits=min(8, cfg["max_bits"]),
                             seed=cfg["seed"])
    report = {"np": report, "dp": dp, "violations": report["violations"] + dp["violations"]}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text + "\n", encoding="utf-8")
    return 2 if report["violations"] else 0


def cmd_node_demo(cfg):
    sbm = generate_sbm(cfg["n_per_block"], cfg["blocks"], cfg["p_in"], cfg["p_out"], cfg["seed"])
    g, labels = sbm.graph, sbm.node_labels
    feats = sbm_features(labels, cfg["blocks"], cfg["feature_noise"], cfg["seed"])
    rng = np.random.default_rng([cfg["seed"], 3])
    order = rng.permutation(g.n)
    n_train = g.n // 2
    model = train_node(g, feats, labels, order[:n_train],
                       TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], seed=cfg["seed"],
                                   noise_beta=cfg["beta"]),
                       num_classes=cfg["blocks"])
    targets = order[n_train:n_train + cfg["targets"]]
    results = [certify_node(model, g, int(t), cfg["beta"], cfg["samples"], cfg["alpha"],
                            cfg["seed"], features=feats, true_label=int(labels[t]))
               for t in targets]
    out = Path(cfg["out"])
    _write_config(out, "node-demo", cfg)
    write_csv((c.row() for c in results), RESULT_COLUMNS, out / "results.csv")
    clean = [int(forward_node(model, g, feats, int(t)).argmax() == labels[t]) for t in targets]
    for c in results:
        state = "abstain" if c.abstained else (
            f"class {c.predicted}, {c.np_radius} edge flips (||S||_0 <= {c.matrix_radius}), "
            f"dp floor {c.dp_radius_floor}")
        print(f"node {c.instance_id} (label {c.true_label}): {state}")
    print(f"clean accuracy on targets {np.mean(clean):.2f}; "
          f"CA(0)={certified_accuracy(results, 0):.2f}; results in {out}")


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "certify": cmd_certify,
            "sweep": cmd_sweep, "oracle-check": cmd_oracle_check, "node-demo": cmd_node_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        code = COMMANDS[args.command](cfg)
        return int(code or 0)
    except (InvalidInput, InvalidParameter, ConfigError, AbstainRequired) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingFailure, ClassifierFailure) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure")
        print(f"internal failure: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
