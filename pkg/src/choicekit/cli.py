"""Config-driven command-line front end.

Subcommands: generate, fit, optimize, evaluate, reproduce, meta.  Every
stochastic command requires an explicit seed and is deterministic given its
resolved configuration; each run writes a manifest sufficient to replay it.
Values from a ``--config`` JSON file are overridden by explicit flags.

Exit codes: 0 success, 2 usage or config error, 3 flagged numeric
non-convergence, 4 solver timeout with an incumbent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .core import (CapacityConstraint, DatasetError, RevenueSpec, Universe,
                   ce_loss, read_product_features_csv, read_transactions_csv,
                   validate_dataset, write_transactions_csv)
from .estimators import EmConfig, MleConfig, fit_feature_mnl_mle, fit_mccm_em, fit_mnl_mle
from .evaluation import (ExperimentSpec, ace_calibration,
                         distribution_shift_experiment,
                         em_assortment_size_experiment, meta_learn,
                         run_opt_experiment, run_prediction_experiment,
                         warm_start_experiment)
from .mip import (adxopt, brute_force_opt, build_mnl_milp, build_nn_mip,
                  build_np_milp, export_lp, mccm_bellman_opt, mnl_milp_opt,
                  np_milp_opt, revenue_ordered, solve_nn_mip)
from .neural import (NeuralChoiceModel, TrainConfig, load_network,
                     save_network, train, write_training_log)
from .synthetic import (AssortmentSampler, MccmModel, MnlModel, NpModel,
                        gen_dataset, gen_instance, load_model, save_model)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGE = 3
EXIT_TIMEOUT = 4

OUT_ENV = "CHOICEKIT_OUT"


def _out_dir(args) -> str:
    out = args.out or os.environ.get(OUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(path: str, doc: dict) -> None:
    _atomic_write(path, lambda tmp: json.dump(doc, open(tmp, "w"), indent=1))


def _manifest(args, extra=None) -> dict:
    doc = {k: v for k, v in vars(args).items() if k != "func"}
    doc["version"] = __version__
    if extra:
        doc.update(extra)
    return doc


def cmd_generate(args) -> int:
    out = _out_dir(args)
    truth = gen_instance(args.truth, args.n, args.seed)
    sampler = AssortmentSampler(truth.universe, args.sampler)
    data = gen_dataset(truth, sampler, args.m, args.seed + 1)
    problems = validate_dataset(data)
    if problems:
        raise RuntimeError(f"generated dataset failed validation: {problems[:3]}")
    _atomic_write(os.path.join(out, "transactions.csv"),
                  lambda p: write_transactions_csv(p, data))
    _atomic_write(os.path.join(out, "truth.json"), lambda p: save_model(p, truth))
    _write_json(os.path.join(out, "manifest.json"), _manifest(args))
    print(f"wrote {data.m} transactions to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    out = _out_dir(args)
    features = read_product_features_csv(args.features) if args.features else None
    data = read_transactions_csv(args.data, product_features=features)
    if data.m == 0:
        raise DatasetError("empty dataset")
    val = read_transactions_csv(args.val, product_features=features) if args.val else None
    code = EXIT_OK
    if args.method == "mnl-mle":
        model = fit_mnl_mle(data, MleConfig(max_iters=args.max_iters))
        _atomic_write(os.path.join(out, "model.json"), lambda p: save_model(p, model))
        if not model.fit_info.get("converged", True):
            code = EXIT_NO_CONVERGE
    elif args.method == "mnl-f-mle":
        model = fit_feature_mnl_mle(data, MleConfig(max_iters=args.max_iters))
        _atomic_write(os.path.join(out, "model.json"), lambda p: save_model(p, model))
        if not model.fit_info.get("converged", True):
            code = EXIT_NO_CONVERGE
    elif args.method == "mccm-em":
        model = fit_mccm_em(data, EmConfig(max_iters=args.max_iters, seed=args.seed))
        _atomic_write(os.path.join(out, "model.json"), lambda p: save_model(p, model))
        if not model.fit_info.get("converged", True):
            code = EXIT_NO_CONVERGE
    elif args.method in ("gasn", "rasn"):
        cfg = TrainConfig(seed=args.seed, epochs=args.epochs,
                          batch_size=args.batch_size, lr=args.lr)
        result = train(args.method, data, cfg, val_data=val, L=args.layers,
                       use_features=args.use_features)
        _atomic_write(os.path.join(out, "model.json"),
                      lambda p: save_network(p, result.params, result.enc))
        _atomic_write(os.path.join(out, "train_log.csv"),
                      lambda p: write_training_log(p, result.log))
    else:
        raise ValueError(f"unknown method {args.method!r}")
    _write_json(os.path.join(out, "manifest.json"), _manifest(args))
    print(f"fitted {args.method}; artifacts in {out}")
    return code


def _load_any_model(path: str):
    """A model file is either a synthetic-model or a network document."""
    with open(path) as fh:
        doc = json.load(fh)
    if "arch" in doc:
        from .neural import network_from_dict
        params, enc = network_from_dict(doc)
        return NeuralChoiceModel(Universe.with_no_purchase(params.output_dim),
                                 params, enc), params, enc
    from .synthetic import model_from_dict
    return model_from_dict(doc), None, None


def cmd_optimize(args) -> int:
    out = _out_dir(args)
    model, params, enc = _load_any_model(args.model)
    universe = model.universe
    with open(args.revenue) as fh:
        rev = RevenueSpec(np.asarray(json.load(fh)["mu"], float), universe)
    cap = None
    if args.capacity:
        with open(args.capacity) as fh:
            doc = json.load(fh)
        cap = CapacityConstraint(np.asarray(doc["a"], float), float(doc["c"]), universe)
    method = args.method
    if method == "mip":
        if params is None or params.arch != "gasn":
            raise ValueError("--method mip requires a trained gated (gasn) network")
        mip = build_nn_mip(params, rev, cap)
        if args.export_lp:
            t = args.t if args.t is not None else 0.0
            _atomic_write(args.export_lp, lambda p: export_lp(mip, p, t=t))
            print(f"exported LP (Dinkelbach level {t}) to {args.export_lp}")
            return EXIT_OK
        result = solve_nn_mip(mip, time_limit_s=args.time_limit)
    elif args.export_lp:
        if isinstance(model, MnlModel):
            mip = build_mnl_milp(model, rev, cap)
        elif isinstance(model, NpModel):
            mip = build_np_milp(model, rev, cap)
        else:
            raise ValueError("LP export supports MNL, NP and gated-net models")
        _atomic_write(args.export_lp, lambda p: export_lp(mip, p))
        print(f"exported LP to {args.export_lp}")
        return EXIT_OK
    elif method == "brute":
        result = brute_force_opt(model, rev, cap)
    elif method == "ro":
        result = revenue_ordered(model, rev, cap)
    elif method == "adxopt":
        result = adxopt(model, rev, cap, removal_limit=args.removal_limit)
        result.extra["removal_limit"] = args.removal_limit
    elif method == "bellman":
        if not isinstance(model, MccmModel):
            raise ValueError("--method bellman requires a Markov-chain model")
        result = mccm_bellman_opt(model, rev, cap)
    elif method == "milp":
        if isinstance(model, MnlModel):
            result = mnl_milp_opt(model, rev, cap)
        elif isinstance(model, NpModel):
            result = np_milp_opt(model, rev, cap)
        else:
            raise ValueError("--method milp requires an MNL or rank-list model")
    else:
        raise ValueError(f"unknown method {method!r}")
    _write_json(os.path.join(out, "result.json"), result.to_dict())
    _write_json(os.path.join(out, "manifest.json"), _manifest(args))
    print(json.dumps(result.to_dict()))
    if method == "mip" and not result.exact:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out = _out_dir(args)
    features = read_product_features_csv(args.features) if args.features else None
    data = read_transactions_csv(args.data, product_features=features)
    model, _, _ = _load_any_model(args.model)
    report = {"ce": ce_loss(model, data),
              "ace": ace_calibration(model, data, bins=args.ace_bins),
              "m": data.m}
    _write_json(os.path.join(out, "evaluation.json"), report)
    print(json.dumps(report))
    return EXIT_OK


def _write_table(table, out: str, stem: str) -> None:
    _atomic_write(os.path.join(out, f"{stem}.csv"), table.to_csv)
    _atomic_write(os.path.join(out, f"{stem}_trials.csv"), table.trials_to_csv)
    if table.meta:
        _write_json(os.path.join(out, f"{stem}_manifest.json"), table.meta)
    print(table.to_text())
    print()


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    full = args.preset == "full"
    seed = args.seed
    if args.table == "t5":
        spec = ExperimentSpec(
            truth_kinds=("mnl", "mccm", "np", "mmnl") if full else ("mnl",),
            n=args.n or 20, m_train=100_000, trials=10, seed=seed, jobs=args.jobs,
            estimators=("uniform", "mnl-mle", "mccm-em", "gasn-1", "rasn-1", "oracle")
            if full else ("uniform", "mnl-mle", "gasn-1", "oracle"))
        _write_table(run_prediction_experiment(spec), out, "t5")
    elif args.table in ("t8", "t9"):
        constrained = args.table == "t9"
        spec = ExperimentSpec(
            truth_kinds=("mnl", "mccm", "np", "mmnl") if full else ("mnl", "mmnl"),
            n=args.n or (20 if full else 15),
            m_train=30_000, seed=seed, jobs=args.jobs,
            n_instances=5, n_draws=20 if full else 4,
            settings=("constrained",) if constrained else ("unconstrained",),
            pipelines=("mnl-mle:ro", "mnl-mle:milp", "mccm-em:adxopt", "gasn-1:mip")
            if constrained else ("mnl-mle:milp", "mccm-em:adxopt", "gasn-1:mip"))
        tables = run_opt_experiment(spec)
        for setting, table in tables.items():
            _write_table(table, out, f"{args.table}_{setting}")
    elif args.table == "t12":
        truth = gen_instance("mccm", args.n or 30, seed, sigma=1.0, c_num=1)
        table = distribution_shift_experiment(
            truth, m_train=100_000 if full else 20_000, seed=seed + 1)
        _write_table(table, out, "t12")
    elif args.table == "fig5":
        table = em_assortment_size_experiment(n=args.n or 20, m=10_000,
                                              trials=10, seed=seed)
        _write_table(table, out, "fig5")
    elif args.table == "fig6":
        res = warm_start_experiment(m_retrain=2_000, n_seeds=10, seed=seed,
                                    m_pretrain=100_000 if full else 50_000)
        _write_json(os.path.join(out, "fig6.json"), res)
        wins = sum(all(w <= c for w, c in zip(r["warm"], r["cold"]))
                   for r in res["runs"])
        print(f"warm start dominates cold start in {wins}/{len(res['runs'])} seeds")
    else:
        raise ValueError(f"unknown table {args.table!r}")
    _write_json(os.path.join(out, "manifest.json"), _manifest(args))
    return EXIT_OK


def cmd_meta(args) -> int:
    out = _out_dir(args)
    features = read_product_features_csv(args.features) if args.features else None
    data = read_transactions_csv(args.data, product_features=features)
    val = read_transactions_csv(args.val, product_features=features)
    fitters = {"mnl-mle": lambda d: fit_mnl_mle(d),
               "mccm-em": lambda d: fit_mccm_em(d, EmConfig(seed=args.seed))}
    names = [s.strip() for s in args.candidates.split(",") if s.strip()]
    unknown = [nm for nm in names if nm not in fitters]
    if unknown:
        raise ValueError(f"unknown candidates: {unknown}")
    model, info = meta_learn(data, val, [(nm, fitters[nm]) for nm in names],
                             m_prime=args.m_prime, seed=args.seed)
    if isinstance(model, NeuralChoiceModel):
        _atomic_write(os.path.join(out, "model.json"),
                      lambda p: save_network(p, model.params, model.enc))
    else:
        _atomic_write(os.path.join(out, "model.json"), lambda p: save_model(p, model))
    _write_json(os.path.join(out, "meta.json"), info)
    _write_json(os.path.join(out, "manifest.json"), _manifest(args))
    print(json.dumps(info))
    return EXIT_OK



REQUIRED_ARGS = {
    "generate": ("truth", "n", "m", "seed"),
    "fit": ("data", "method", "seed"),
    "optimize": ("model", "revenue"),
    "evaluate": ("model", "data"),
    "reproduce": ("seed",),
    "meta": ("data", "val", "seed"),
}

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choicekit",
                                     description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="JSON file of defaults; flags override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a synthetic truth and dataset")
    p.add_argument("--truth", choices=["mnl", "mccm", "np", "mmnl"])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sampler", default="uniform-size")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a model to a transaction CSV")
    p.add_argument("--data")
    p.add_argument("--val")
    p.add_argument("--features")
    p.add_argument("--method",
                   choices=["mnl-mle", "mnl-f-mle", "mccm-em", "gasn", "rasn"])
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.0005)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--use-features", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("optimize", help="optimize an assortment under a model")
    p.add_argument("--model")
    p.add_argument("--revenue", help='JSON file {"mu": [...]}')
    p.add_argument("--capacity", help='JSON file {"a": [...], "c": ...}')
    p.add_argument("--method", default="brute",
                   choices=["brute", "ro", "adxopt", "bellman", "milp", "mip"])
    p.add_argument("--removal-limit", type=int, default=5)
    p.add_argument("--time-limit", type=float, default=300.0)
    p.add_argument("--export-lp", help="write an LP file instead of solving")
    p.add_argument("--t", type=float, help="Dinkelbach level for ratio-objective export")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="test CE and calibration of a model file")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--features")
    p.add_argument("--ace-bins", type=int, default=25)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reproduce", help="rerun a published experiment grid")
    p.add_argument("table", choices=["t5", "t8", "t9", "t12", "fig5", "fig6"])
    p.add_argument("--preset", default="desk", choices=["desk", "full"])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("meta", help="best-of-the-bests model selection")
    p.add_argument("--data")
    p.add_argument("--val")
    p.add_argument("--features")
    p.add_argument("--candidates", default="mnl-mle,mccm-em")
    p.add_argument("--m-prime", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_meta)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: bad config file: {exc}", file=sys.stderr)
            return EXIT_USAGE
        explicit = {a[2:].replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in defaults.items():
            dest = key.replace("-", "_")
            if hasattr(args, dest) and dest not in explicit:
                setattr(args, dest, value)
    missing = [name for name in REQUIRED_ARGS.get(args.command, ())
               if getattr(args, name, None) is None]
    if missing:
        flags = ", ".join("--" + m for m in missing)
        print(f"error: missing required arguments: {flags}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, DatasetError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
