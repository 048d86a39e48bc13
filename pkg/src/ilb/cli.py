"""Command-line front end: ``ilb <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .boost import (BoostedModel, model_from_json, model_to_json, predict_margins, render_program, sigmoid,
                    train)
from .config import Config, ConfigError, load_config
from .instances import ExampleSet, dump_table, generate_instances
from .logic import FactBase, ParseError, parse_atoms, parse_facts
from .metrics import closed_world, evaluate, macro_average
from .synth import SynthConfig, generate_synthetic

log = logging.getLogger("ilb")


class CLIError(Exception):
    pass


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file, so no partial file is left behind."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_facts(path) -> FactBase:
    try:
        return parse_facts(_read(path))
    except ParseError as e:
        raise CLIError(f"{path}: {e}") from None


def _load_atoms(path):
    try:
        return parse_atoms(_read(path))
    except ParseError as e:
        raise CLIError(f"{path}: {e}") from None


def _load_examples(pos, neg=None) -> ExampleSet:
    positives = _load_atoms(pos)
    negatives = _load_atoms(neg) if neg else []
    if not positives:
        raise CLIError(f"{pos}: no positive examples")
    return ExampleSet.from_atoms(positives, negatives)


def _config(args) -> Config:
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _load_model(path) -> BoostedModel:
    return model_from_json(_read(path))


def render_predictions(margins) -> str:
    rows = sorted(margins.items(), key=lambda kv: (-kv[1], str(kv[0])))
    return "".join(f"{h}\t{sigmoid(f)!r}\t{f!r}\n" for h, f in rows)


def read_predictions(text: str):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise CLIError(f"predictions line {lineno}: expected 'head<TAB>score'")
        heads = parse_atoms(cols[0].strip() + ".")
        out[heads[0]] = float(cols[1])
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> None:
    cfg = SynthConfig(n_entities=args.entities, mentions_per_entity=args.mentions,
                      tokens_per_entity=args.tokens, vocab_size=args.vocab, noise=args.noise,
                      tag=args.tag)
    facts, pos = generate_synthetic(cfg, args.seed)
    out = Path(args.out_dir)
    write_atomic(out / "facts.pl", facts)
    write_atomic(out / "pos.pl", pos)


def cmd_gen_instances(args) -> None:
    db = _load_facts(args.facts)
    ex = _load_examples(args.pos, args.neg)
    table = generate_instances(db, ex, _config(args))
    write_atomic(args.out, dump_table(table))


def _fit(db: FactBase, ex: ExampleSet, cfg: Config) -> BoostedModel:
    table = generate_instances(db, ex, cfg)
    if len(table) == 0:
        raise CLIError("no instances generated: no positive example is connected in the fact base")
    return train(table, ex, cfg)


def cmd_train(args) -> None:
    model = _fit(_load_facts(args.facts), _load_examples(args.pos, args.neg), _config(args))
    text, rules = model_to_json(model), render_program(model)
    write_atomic(args.model, text)
    write_atomic(Path(args.model).with_suffix(".rules.pl"), rules)


def cmd_predict(args) -> None:
    model = _load_model(args.model)
    db = _load_facts(args.facts)
    queries = [a for q in args.query or () for a in _load_atoms(q)]
    if args.only_queries:
        if not queries:
            raise CLIError("--only-queries needs at least one --query file")
        margins = predict_margins(model, db, queries)
    else:
        margins = predict_margins(model, db)
        if queries:
            # heads nothing deduces still get a row, at the model's floor score
            margins.update(predict_margins(model, db, queries))
    write_atomic(args.out, render_predictions(margins))


def cmd_eval(args) -> None:
    preds = read_predictions(_read(args.pred))
    ex = _load_examples(args.pos, args.neg)
    missing = [p for p in ex.positives if p not in preds]
    if missing:
        log.warning("%d positives have no prediction; scored %.3g", len(missing), args.missing_score)
    report = evaluate(closed_world(preds, ex.positives, ex.negatives, args.missing_score))
    write_atomic(args.out, report.to_text())
    write_atomic(str(args.out) + ".kv", report.to_kv())
    if args.curves:
        write_atomic(f"{args.curves}.roc.tsv", "".join(f"{a!r}\t{b!r}\n" for a, b in report.roc_points))
        write_atomic(f"{args.curves}.pr.tsv", "".join(f"{a!r}\t{b!r}\n" for a, b in report.pr_points))
    print(report.to_text(), end="")


def cmd_export_rules(args) -> None:
    write_atomic(args.out, render_program(_load_model(args.model)))


def cmd_cv(args) -> None:
    """Leave-one-fold-out: train on the other folds, test on the held-out one."""
    cfg = _config(args)
    folds = []
    for d in args.fold:
        d = Path(d)
        neg = d / "neg.pl"
        folds.append((_load_facts(d / "facts.pl"), _load_examples(d / "pos.pl", neg if neg.exists() else None)))
    if len(folds) < 2:
        raise CLIError("cross-validation needs at least two folds")
    reports, lines = [], []
    for i, (test_db, test_ex) in enumerate(folds):
        train_db = FactBase(a for j, (db, _) in enumerate(folds) if j != i for a in db)
        ex = ExampleSet.from_atoms(
            [a for j, (_, e) in enumerate(folds) if j != i for a in e.positives],
            [a for j, (_, e) in enumerate(folds) if j != i for a in e.negatives],
        )
        model = _fit(train_db, ex, cfg)
        preds = {h: sigmoid(f) for h, f in predict_margins(model, test_db).items()}
        r = evaluate(closed_world(preds, test_ex.positives, test_ex.negatives, model.floor_probability))
        reports.append(r)
        lines.append(f"fold {i + 1} ({args.fold[i]}): AUC-PR {r.auc_pr:.4f} AUC-ROC {r.auc_roc:.4f}")
    avg = macro_average(reports)
    lines.append(f"mean: AUC-PR {avg['auc_pr']:.4f} +- {avg['auc_pr_std']:.4f} "
                 f"AUC-ROC {avg['auc_roc']:.4f} +- {avg['auc_roc_std']:.4f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        write_atomic(args.out, text)
    print(text, end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilb", description="Inductive Logic Boosting")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def learning_opts(p):
        p.add_argument("--facts", required=True)
        p.add_argument("--pos", required=True)
        p.add_argument("--neg")
        p.add_argument("--config")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="learn a boosted rule model")
    learning_opts(p)
    p.add_argument("--model", required=True, help="output model file (JSON)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score target heads with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--facts", required=True)
    p.add_argument("--query", action="append", help="file of heads to score (repeatable)")
    p.add_argument("--only-queries", action="store_true",
                   help="score only the query heads instead of every deducible head")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="AUC-PR / AUC-ROC of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--pos", required=True)
    p.add_argument("--neg")
    p.add_argument("--out", required=True)
    p.add_argument("--curves", help="prefix for ROC/PR curve point files")
    p.add_argument("--missing-score", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-rules", help="write the Problog program of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_rules)

    p = sub.add_parser("synth", help="generate a synthetic entity-resolution dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--entities", type=int, default=SynthConfig.n_entities)
    p.add_argument("--mentions", type=int, default=SynthConfig.mentions_per_entity)
    p.add_argument("--tokens", type=int, default=SynthConfig.tokens_per_entity)
    p.add_argument("--vocab", type=int, default=SynthConfig.vocab_size)
    p.add_argument("--noise", type=float, default=SynthConfig.noise)
    p.add_argument("--tag", default="")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-instances", help="dump the instance table")
    learning_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_instances)

    p = sub.add_parser("cv", help="leave-one-fold-out cross-validation over fold directories")
    p.add_argument("--fold", action="append", required=True,
                   help="directory with facts.pl, pos.pl and optional neg.pl (repeatable)")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cv)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (CLIError, ConfigError, ValueError, OSError) as e:
        print(f"ilb: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
