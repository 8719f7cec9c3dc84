"""Command-line entry point: ``transrec <subcommand> ...``.

Options can also come from a ``key = value`` config file given by ``--config``
or the ``TRANSREC_CONFIG`` environment variable; command-line flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset as dsmod
from .errors import DataError, ModelFileError, NumericalError
from .evaluation import evaluate
from .modelfile import load_model, save_model
from .models import KINDS, Regularization, TransRec
from .training import ALPHA_GRID, LAMBDA_GRID, TrainConfig, grid_search, train

EXIT_INPUT = 3
EXIT_NUMERIC = 4

_log = logging.getLogger("transrec")


def _delimiter(name: str) -> str:
    return {"tab": "\t", "comma": ",", "\\t": "\t"}.get(name, name)


def _columns(spec: str) -> list[int | str]:
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("need three columns: user,item,timestamp")
    return [int(p) if p.lstrip("-").isdigit() else p for p in parts]


def _resolved(args) -> dict:
    skip = {"func", "config", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_lines(path, lines, config) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        fh.write("".join(f"{line}\n" for line in lines))


def cmd_prepare(args) -> int:
    log = dsmod.load_interactions(
        args.input, _delimiter(args.delimiter), args.columns, header=args.header or None, on_error=args.on_error
    )
    filtered = dsmod.core_filter(log, args.min_count)
    ds = dsmod.split_leave_one_out(dsmod.build_sequences(filtered))
    out = Path(args.output)
    dsmod.save_prepared(ds, out)
    info = dsmod.manifest(ds)
    info.update(
        raw_actions=len(log), skipped_lines=log.skipped, filter_passes=filtered.filter_iterations,
        config=json.dumps(_resolved(args), sort_keys=True),
    )
    text = dsmod.format_kv(info)
    (out / dsmod.MANIFEST_FILE).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _train_config(args) -> TrainConfig:
    reg = Regularization(
        args.reg if args.reg_embed is None else args.reg_embed,
        args.reg if args.reg_bias is None else args.reg_bias,
        args.reg if args.reg_translation is None else args.reg_translation,
    )
    return TrainConfig(
        learning_rate=args.lr, reg=reg, dim=args.dim, max_iterations=args.max_iterations,
        samples_per_iteration=args.samples_per_iteration, patience=args.patience, seed=args.seed,
    )


def _grid(values, default):
    if values is None:
        return None
    return list(values) if values else list(default)


def cmd_train(args) -> int:
    ds = dsmod.load_prepared(args.dataset)
    cfg = _train_config(args)
    hyper = {}
    if args.model == "bprmf":
        hyper["use_bias"] = not args.no_bias
    if args.model == "fmc":
        hyper["use_bias"] = args.fmc_bias
    lambdas = _grid(args.lambda_grid, LAMBDA_GRID)
    alphas = _grid(args.alpha_grid, ALPHA_GRID)
    config = _resolved(args)
    if lambdas is not None or (alphas is not None and args.model == "prme"):
        result = grid_search(
            ds, args.model, cfg, lambdas=lambdas or [cfg.reg.embed], alphas=alphas or [args.alpha], **hyper
        )
        model, report = result.model, result.report
        config["selected"] = {"lambda": result.config.reg.embed, "alpha": result.hyper.get("alpha")}
        if args.grid_table:
            rows = ["lambda\talpha\tval_auc\tbest_iteration"]
            rows += [f"{r['lambda']}\t{r['alpha']}\t{r['val_auc']:.6f}\t{r['best_iteration']}" for r in result.table]
            _write_lines(args.grid_table, rows, config)
    else:
        if args.model == "prme":
            hyper["alpha"] = args.alpha
        model, report = train(ds, args.model, cfg, **hyper)
    save_model(args.output, model, ds.user_ids, ds.item_ids, config)
    if args.report:
        _write_lines(args.report, report.lines(), config)
    sys.stdout.write(
        dsmod.format_kv({"model": args.model, "best_iteration": report.best_iteration,
                         "val_auc": f"{report.best_val_auc:.6f}", "output": args.output})
    )
    return 0


def cmd_eval(args) -> int:
    ds = dsmod.load_prepared(args.dataset)
    bundle = load_model(args.model, item_ids=ds.item_ids)
    bundle.check_users(ds.user_ids)
    rep = evaluate(bundle.model, ds, args.split, args.k)
    info = {"model": bundle.model.kind, **rep.to_dict(), "config": json.dumps(bundle.config, sort_keys=True)}
    sys.stdout.write(dsmod.format_kv(info))
    if args.ranks:
        _write_lines(args.ranks, ["user_id\trank\tcandidates"] + rep.rank_lines(ds.user_ids), bundle.config)
    return 0


def cmd_recommend(args) -> int:
    from .retrieval import build_index, recommend

    bundle = load_model(args.model)
    model = bundle.model
    if not isinstance(model, TransRec):
        raise DataError(f"recommend serves TransRec models, not {model.kind}")
    try:
        u = bundle.user_ids.index(args.user)
    except ValueError:
        raise DataError(f"unknown user {args.user!r}") from None
    try:
        i = bundle.item_ids.index(args.prev_item)
    except ValueError:
        raise DataError(f"unknown item {args.prev_item!r}") from None
    seen = ()
    if args.exclude_seen:
        if not args.dataset:
            raise DataError("--exclude-seen needs --dataset to know the user's history")
        ds = dsmod.load_prepared(args.dataset)
        bundle.check_items(ds.item_ids)
        du = ds.user_ids.index(args.user)
        seen = ds.user_items[du].tolist()
    recs = recommend(build_index(model), model, u, i, args.top, args.exclude_seen, seen)
    for rank, (j, s) in enumerate(recs, 1):
        sys.stdout.write(f"{rank}\t{bundle.item_ids[j]}\t{s:.6f}\n")
    return 0


def cmd_i2i_features(args) -> int:
    from .item2item.features import extract_features, read_corpus, save_triplets

    fm = extract_features(read_corpus(args.corpus), args.n_features)
    save_triplets(fm, args.output, args.vocab)
    sys.stdout.write(dsmod.format_kv({"items": len(fm.item_ids), "features": fm.n_features, **fm.meta}))
    return 0


def _i2i_data(args):
    from .item2item.edges import read_edges, split_edges
    from .item2item.features import load_triplets

    pairs = read_edges(args.edges, _delimiter(args.delimiter))
    fm = load_triplets(args.features)
    # items that only occur in edges get empty feature rows
    known = set(fm.item_ids)
    extra = [x for p in pairs for x in p if x not in known]
    item_ids = fm.item_ids + list(dict.fromkeys(extra))
    fm = fm.reindex(item_ids)
    return fm, split_edges(pairs, item_ids, seed=args.split_seed)


def _edge_report(rep) -> dict:
    # one evaluated query per held-out edge, not per user
    return {("edges" if k == "users" else k): v for k, v in rep.to_dict().items()}


def cmd_i2i_train(args) -> int:
    from .item2item.edges import eval_i2i, train_i2i

    fm, edges = _i2i_data(args)
    cfg = _train_config(args)
    lambdas = _grid(args.lambda_grid, LAMBDA_GRID) or [None]
    best = None
    table = []
    for lam in lambdas:
        c = cfg if lam is None else TrainConfig(**{**cfg.__dict__, "reg": Regularization.shared(lam)})
        model, report = train_i2i(edges, fm, args.model, c, init_scale=args.init_scale)
        table.append((c.reg.embed, report.best_val_auc))
        if best is None or report.best_val_auc > best[1].best_val_auc:
            best = (model, report, c)
    model, report, c = best
    config = _resolved(args)
    config["selected"] = {"lambda": c.reg.embed}
    save_model(args.output, model, [], fm.item_ids, config)
    if args.report:
        _write_lines(args.report, report.lines(), config)
    rep = eval_i2i(model, edges, "validation", args.k)
    sys.stdout.write(dsmod.format_kv({"model": args.model, "best_iteration": report.best_iteration,
                                      **_edge_report(rep), "grid": json.dumps(table)}))
    return 0


def cmd_i2i_eval(args) -> int:
    from .item2item.edges import eval_i2i

    bundle = load_model(args.model)
    if args.split_seed is None:
        args.split_seed = bundle.config.get("split_seed", 0)
    fm, edges = _i2i_data(args)
    bundle.check_items(fm.item_ids)
    model = bundle.model.attach(fm)
    rep = eval_i2i(model, edges, args.split, args.k)
    sys.stdout.write(dsmod.format_kv({"model": model.kind, **_edge_report(rep)}))
    return 0


def _add_train_options(p, lr: float, dim: int) -> None:
    p.add_argument("--dim", type=int, default=dim, help=f"embedding size K (default {dim})")
    p.add_argument("--lr", type=float, default=lr, help=f"learning rate (default {lr})")
    p.add_argument("--reg", type=float, default=0.01, help="shared L2 weight (default 0.01)")
    p.add_argument("--reg-embed", type=float, help="L2 weight for factor/embedding matrices")
    p.add_argument("--reg-bias", type=float, help="L2 weight for item biases")
    p.add_argument("--reg-translation", type=float, help="L2 weight for translation vectors")
    p.add_argument("--lambda-grid", type=float, nargs="*",
                   help="grid-search the shared L2 weight; no values means 0 0.001 0.01 0.1 1")
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--samples-per-iteration", type=int, help="default: one pass over the training data")
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write per-iteration training report here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="transrec", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="key = value defaults file (or set TRANSREC_CONFIG)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter, sequence and split an interaction log")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="directory for the prepared dataset")
    p.add_argument("--delimiter", default="tab", help="tab, comma or a literal character")
    p.add_argument("--columns", type=_columns, default=[0, 1, 2],
                   help="user,item,timestamp as 0-based positions or header names (default 0,1,2)")
    p.add_argument("--header", action="store_true", help="first line is a header")
    p.add_argument("--on-error", choices=("fail", "skip"), default="fail")
    p.add_argument("--min-count", type=int, default=5)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="fit a sequential model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, choices=KINDS)
    p.add_argument("--output", required=True)
    _add_train_options(p, lr=0.05, dim=10)
    p.add_argument("--alpha", type=float, default=0.2, help="PRME weight (default 0.2)")
    p.add_argument("--alpha-grid", type=float, nargs="*", help="PRME alpha grid; no values means 0.2 0.5 0.8")
    p.add_argument("--no-bias", action="store_true", help="BPR-MF without item bias")
    p.add_argument("--fmc-bias", action="store_true", help="FMC with an item bias")
    p.add_argument("--grid-table", help="write the grid-search table here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="AUC and Hit@K on the validation or test items")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("validation", "test"), default="test")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--ranks", help="write per-user ranks here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("recommend", help="top-N next items for a user after an item")
    p.add_argument("--model", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--prev-item", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--exclude-seen", action="store_true")
    p.add_argument("--dataset", help="prepared dataset, needed for --exclude-seen")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("i2i-features", help="bag-of-words features from item_id<TAB>text lines")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True, help="triplet feature file")
    p.add_argument("--vocab", help="write the vocabulary here, one term per line")
    p.add_argument("--n-features", type=int, default=5000)
    p.set_defaults(func=cmd_i2i_features)

    for name, func in (("i2i-train", cmd_i2i_train), ("i2i-eval", cmd_i2i_eval)):
        p = sub.add_parser(name, help="item-to-item " + name[4:])
        p.add_argument("--edges", required=True, help="src_item<TAB>dst_item lines")
        p.add_argument("--features", required=True, help="triplet feature file")
        p.add_argument("--delimiter", default="tab")
        p.add_argument("--k", type=int, default=10)
        if name == "i2i-train":
            p.add_argument("--model", required=True, choices=("i2i-transrec", "wnn", "lmt"))
            p.add_argument("--output", required=True)
            p.add_argument("--split-seed", type=int, default=0)
            p.add_argument("--init-scale", type=float, default=0.1)
            _add_train_options(p, lr=0.01, dim=100)
        else:
            p.add_argument("--model", required=True)
            p.add_argument("--split-seed", type=int, help="default: the seed stored in the model")
            p.add_argument("--split", choices=("validation", "test"), default="test")
        p.set_defaults(func=func)
    return ap


def _config_defaults(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in dsmod.parse_kv(text).items()}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    commands = parser._subparsers._group_actions[0].choices
    command = next((a for a in rest if a in commands), None)
    try:
        cfg_path = known.config or os.environ.get("TRANSREC_CONFIG")
        if cfg_path and command:
            defaults = _config_defaults(cfg_path)
            sub = commands[command]
            for action in sub._actions:
                if action.dest in defaults:
                    raw = defaults[action.dest]
                    if action.nargs == "*":
                        value = [action.type(x) if action.type else x for x in raw.split()]
                    elif action.type is not None:
                        value = action.type(raw)
                    elif isinstance(action, argparse._StoreTrueAction):
                        value = raw.lower() in ("1", "true", "yes", "on")
                    else:
                        value = raw
                    sub.set_defaults(**{action.dest: value})
                    action.required = False
        args = parser.parse_args(argv)
    except DataError as exc:
        print(f"transrec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ModelFileError, ValueError) as exc:
        print(f"transrec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"transrec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
