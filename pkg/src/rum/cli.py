"""Command-line surface: `rum <subcommand> [flags]`.

Experiment subcommands emit CSV (one-line header) and, where a report is
meaningful, a JSON document with the config snapshot and per-seed results.
Exit code 0 on success; any library error prints a diagnostic and exits
nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import experiments as E
from . import model as M
from . import tensor as T
from .expressiveness import (anon_distinguish, detect_cycle, wl_distinguish,
                             witness_pattern)
from .graphs import (GraphError, csl_corpus, load_edge_list,
                     load_features_labels_masks, load_int_column)
from .walks import anonymous_experiment, batch_walks


def parse_config_file(path):
    """key=value lines mirroring TrainConfig fields."""
    overrides = {}
    fields = {f.name: f.type for f in dataclasses.fields(M.TrainConfig)}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise GraphError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise GraphError(f"{path}:{lineno}: unknown config key {key!r}")
            current = getattr(M.TrainConfig(), key)
            overrides[key] = type(current)(float(value)) if not isinstance(current, int) \
                else int(value)
    return overrides


def build_config(args):
    overrides = {}
    if getattr(args, "config", None):
        overrides.update(parse_config_file(args.config))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return M.TrainConfig(**overrides).validate()


def load_dataset(args):
    g = load_edge_list(args.edges)
    return load_features_labels_masks(
        g, args.features, args.labels,
        train_mask_path=getattr(args, "train_mask", None),
        val_mask_path=getattr(args, "val_mask", None),
        test_mask_path=getattr(args, "test_mask", None))


def add_dataset_flags(p, masks=True):
    p.add_argument("--edges", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    if masks:
        p.add_argument("--train-mask", dest="train_mask")
        p.add_argument("--val-mask", dest="val_mask")
        p.add_argument("--test-mask", dest="test_mask")


def add_common_flags(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output path (csv or json)")
    p.add_argument("--checkpoint", help="parameter checkpoint path")


def cmd_train(args):
    data = load_dataset(args)
    cfg = build_config(args)
    seeds = [cfg.seed + i for i in range(args.num_seeds)]
    per_seed = []
    params = None
    for seed in seeds:
        m, params = E.train_node_classifier(
            cfg.with_overrides(seed=seed), data,
            consistency_unlabeled=args.consistency_unlabeled)
        per_seed.append({"seed": seed, "val_accuracy": m.val_accuracy,
                         "test_accuracy": m.test_accuracy,
                         "best_epoch": m.best_epoch, "wall_time": m.wall_time})
        print(f"seed {seed}: val={m.val_accuracy:.4f} test={m.test_accuracy:.4f}")
    report = E.aggregate("node_classification", dataclasses.asdict(cfg), seeds, per_seed)
    print(f"mean test accuracy: {report.aggregates['mean_test_accuracy']:.4f}")
    if args.out:
        report.to_json(args.out)
    if args.checkpoint and params is not None:
        T.save_checkpoint(args.checkpoint, params)
    return 0


def cmd_eval(args):
    data = load_dataset(args)
    cfg = build_config(args)
    params = T.load_checkpoint(args.checkpoint)
    mask = data.test_mask if data.test_mask is not None else np.ones(
        data.graph.num_nodes, dtype=bool)
    acc = E.evaluate_on_graph(params, data.graph, data, cfg, seed=cfg.seed, mask=mask)
    print(f"accuracy: {acc:.4f}")
    return 0


def cmd_walk(args):
    g = load_edge_list(args.edges)
    cfg = build_config(args)
    nodes = ([int(x) for x in args.nodes.split(",")] if args.nodes
             else list(range(g.num_nodes)))
    walks = batch_walks(g, np.array(nodes), args.length, args.samples,
                        cfg.seed, terminating=args.terminating)
    lines = []
    for i, v in enumerate(nodes):
        for s in range(args.samples):
            w = walks[i, s].tolist()
            anon = anonymous_experiment(tuple(w))
            lines.append(f"{v}\t{s}\t{','.join(map(str, w))}\t"
                         f"{','.join(map(str, anon))}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_energy(args):
    data = load_dataset(args)
    cfg = build_config(args)
    grid = [int(x) for x in args.depths.split(",")]
    trained = T.load_checkpoint(args.checkpoint) if args.checkpoint else None
    rows = E.run_dirichlet_experiment(data, grid, cfg=cfg, seed=cfg.seed,
                                      trained_params=trained)
    header = list(rows[0].keys())
    E.write_csv(args.out or "energy.csv", header,
                [[r[h] for h in header] for r in rows])
    for r in rows:
        print(r)
    return 0


def cmd_csl(args):
    cfg = build_config(args)
    corpus = csl_corpus(n_nodes=args.nodes, copies_per_class=args.copies,
                        seed=cfg.seed)
    run_cfg = cfg.with_overrides(walk_length=args.length or cfg.walk_length,
                                 max_walk_length=max(args.length or cfg.walk_length,
                                                     cfg.max_walk_length))
    m = E.train_graph_classifier(run_cfg, corpus, n_folds=args.folds)
    print(f"fold accuracies: {[round(a, 3) for a in m.fold_accuracies]}")
    print(f"mean: {m.test_accuracy:.4f}")
    if args.with_gcn_baseline:
        accs = E.gcn_graph_classifier_accuracy(corpus, seed=cfg.seed)
        print(f"gcn baseline folds: {[round(a, 3) for a in accs]} "
              f"mean {float(np.mean(accs)):.4f}")
    if args.out:
        report = E.aggregate("csl", dataclasses.asdict(run_cfg),
                             [cfg.seed], [{"test_accuracy": m.test_accuracy,
                                           "fold_accuracies": m.fold_accuracies}])
        report.to_json(args.out)
    return 0


def cmd_neighborsmatch(args):
    cfg = build_config(args) if args.config else None
    grid = [int(x) for x in args.depths.split(",")]
    rows = E.run_neighborsmatch(grid, cfg=cfg, n_instances=args.instances,
                                hidden=args.hidden,
                                seed=args.seed if args.seed is not None else 0,
                                verbose=True)
    E.write_csv(args.out or "neighborsmatch.csv",
                ["depth", "rum_train_acc", "gcn_train_acc"],
                [[r["depth"], r["rum_train_acc"], r["gcn_train_acc"]] for r in rows])
    return 0


def cmd_robustness(args):
    data = load_dataset(args)
    cfg = build_config(args)
    fractions = [float(x) for x in args.fractions.split(",")]
    seeds = [cfg.seed + i for i in range(args.num_seeds)]
    rows = E.run_robustness(data, fractions, seeds, cfg=cfg, retrain=args.retrain,
                            consistency_unlabeled=args.consistency_unlabeled,
                            verbose=True)
    E.write_csv(args.out or "robustness.csv",
                ["fraction", "rum_accuracy", "gcn_accuracy"],
                [[r["fraction"], r["rum_accuracy"], r["gcn_accuracy"]] for r in rows])
    return 0


def cmd_ablation(args):
    data = load_dataset(args)
    cfg = build_config(args)
    seeds = tuple(cfg.seed + i for i in range(args.num_seeds))
    table = E.run_ablation(data, cfg=cfg, seeds=seeds,
                           consistency_unlabeled=args.consistency_unlabeled,
                           verbose=True)
    for variant, stats in table.items():
        print(f"{variant}: {stats['mean']:.3f} ± {stats['std']:.3f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"config": dataclasses.asdict(cfg), "seeds": list(seeds),
                       "table": table}, f, indent=2)
    return 0


def cmd_sweep(args):
    data = load_dataset(args)
    cfg = build_config(args)
    k_grid = [int(x) for x in args.samples_grid.split(",")]
    l_grid = [int(x) for x in args.length_grid.split(",")]
    rows = E.run_sweep(data, k_grid, l_grid, cfg=cfg,
                       seeds=tuple(cfg.seed + i for i in range(args.num_seeds)),
                       consistency_unlabeled=args.consistency_unlabeled,
                       verbose=True)
    E.write_csv(args.out or "sweep.csv",
                ["num_samples", "walk_length", "accuracy"],
                [[r["num_samples"], r["walk_length"], r["accuracy"]] for r in rows])
    return 0


def cmd_isotest(args):
    g1 = load_edge_list(args.edges)
    g2 = load_edge_list(args.edges2)
    labels1 = load_int_column(args.labels) if args.labels else None
    labels2 = load_int_column(args.labels2) if args.labels2 else None
    wl = wl_distinguish(g1, g2, labels1, labels2)
    print(f"wl_distinguish: {wl}")
    lengths = [int(x) for x in args.lengths.split(",")]
    for l in lengths:
        try:
            verdict = anon_distinguish(g1, g2, l, mode=args.mode,
                                       labels1=labels1, labels2=labels2,
                                       n_samples=args.samples, seed=args.seed or 0)
        except Exception as exc:
            print(f"l={l}: error: {exc}")
            continue
        line = f"l={l}: anon_distinguish={verdict}"
        if verdict and args.mode == "exact":
            line += f" witness={witness_pattern(g1, g2, l, labels1, labels2)}"
        print(line)
    return 0


def cmd_cycle_detect(args):
    g = load_edge_list(args.edges)
    flag = detect_cycle(g, args.k, mode=args.mode, n_samples=args.samples,
                        seed=args.seed or 0)
    print(f"cycle of length {args.k}: {flag}")
    return 0


def cmd_gradcheck(args):
    from .tensor import grad_check
    from . import graphs as G
    rng = np.random.default_rng(args.seed or 0)
    cfg = M.TrainConfig(walk_length=3, num_samples=2, hidden_dim=4,
                        feat_state_dim=4, anon_state_dim=4, merge_dim=4,
                        max_walk_length=4, dropout=0.0)
    g = G.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    X = rng.normal(size=(5, 3))
    params = M.init_params(rng, 3, 2, cfg)
    names = sorted(params)

    def loss_fn(*tensors):
        p = dict(zip(names, tensors))
        per, mix, hx, xs = M.node_class_probs(p, g, X, np.arange(5), cfg, seed=1)
        nll = T.nll_from_probs(mix, [0, 1, 0, 1, 0])
        return M.total_loss(nll, M.self_supervised_loss(p, hx, xs),
                            M.consistency_loss(per, cfg.temperature), 1.0, 1.0)

    err = grad_check(loss_fn, [params[k] for k in names])
    print(f"max relative error: {err:.3e}")
    return 0 if err < 1e-3 else 1


def cmd_timing(args):
    data = load_dataset(args)
    cfg = build_config(args)
    l_grid = [int(x) for x in args.length_grid.split(",")]
    k_grid = [int(x) for x in args.samples_grid.split(",")]
    run_cfg = cfg.with_overrides(max_walk_length=max(max(l_grid), cfg.max_walk_length))
    length_rows, sample_rows = E.timing_report(data, l_grid, k_grid, cfg=run_cfg,
                                               seed=run_cfg.seed)
    E.write_csv(args.out or "timing.csv",
                ["walk_length", "num_samples", "rum_seconds", "gcn_seconds"],
                [[r["walk_length"], r["num_samples"], r["rum_seconds"],
                  r.get("gcn_seconds", "")] for r in length_rows + sample_rows])
    r2_l = E.linear_fit_r2([r["walk_length"] for r in length_rows],
                           [r["rum_seconds"] for r in length_rows])
    r2_k = E.linear_fit_r2([r["num_samples"] for r in sample_rows],
                           [r["rum_seconds"] for r in sample_rows])
    print(f"R^2 vs length: {r2_l:.3f}; R^2 vs samples: {r2_k:.3f}")
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="rum", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="node classification training")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--num-seeds", type=int, default=1)
    p.add_argument("--consistency-unlabeled", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    add_dataset_flags(p)
    add_common_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("walk", help="dump sampled walks and anonymous indices")
    p.add_argument("--edges", required=True)
    add_common_flags(p)
    p.add_argument("--nodes", help="comma-separated start nodes (default: all)")
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--terminating", action="store_true",
                   help="reverse walks so they end at the start node")
    p.set_defaults(fn=cmd_walk)

    p = sub.add_parser("energy", help="representation energy vs depth")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--depths", default="1,2,4,8,12,16")
    p.set_defaults(fn=cmd_energy)

    p = sub.add_parser("csl", help="ring-with-skip-links graph classification")
    add_common_flags(p)
    p.add_argument("--nodes", type=int, default=41)
    p.add_argument("--copies", type=int, default=15)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--length", type=int, default=16)
    p.add_argument("--with-gcn-baseline", action="store_true")
    p.set_defaults(fn=cmd_csl)

    p = sub.add_parser("neighborsmatch", help="tree matching training accuracy")
    add_common_flags(p)
    p.add_argument("--depths", default="2,3")
    p.add_argument("--instances", type=int, default=128)
    p.add_argument("--hidden", type=int, default=32)
    p.set_defaults(fn=cmd_neighborsmatch)

    p = sub.add_parser("robustness", help="accuracy under fake edges")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--fractions", default="0,0.02,0.05,0.10,0.20")
    p.add_argument("--num-seeds", type=int, default=3)
    p.add_argument("--retrain", action="store_true")
    p.add_argument("--consistency-unlabeled", action="store_true")
    p.set_defaults(fn=cmd_robustness)

    p = sub.add_parser("ablation", help="component deletion study")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--num-seeds", type=int, default=3)
    p.add_argument("--consistency-unlabeled", action="store_true")
    p.set_defaults(fn=cmd_ablation)

    p = sub.add_parser("sweep", help="samples x length accuracy grid")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--samples-grid", default="1,2,4,6,9")
    p.add_argument("--length-grid", default="1,2,4,6,9")
    p.add_argument("--num-seeds", type=int, default=2)
    p.add_argument("--consistency-unlabeled", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("isotest", help="distinguish two graphs")
    p.add_argument("--edges", required=True)
    p.add_argument("--edges2", required=True)
    p.add_argument("--labels")
    p.add_argument("--labels2")
    p.add_argument("--lengths", default="3,4,5,6")
    p.add_argument("--mode", choices=("exact", "monte-carlo"), default="exact")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_isotest)

    p = sub.add_parser("cycle-detect", help="closed-walk cycle detector")
    p.add_argument("--edges", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--mode", choices=("exact", "monte-carlo"), default="exact")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_cycle_detect)

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("timing", help="inference wall-time scaling")
    add_dataset_flags(p)
    add_common_flags(p)
    p.add_argument("--length-grid", default="1,2,4,8,12,16")
    p.add_argument("--samples-grid", default="1,2,4,6,8")
    p.set_defaults(fn=cmd_timing)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (GraphError, ValueError, FileNotFoundError, RuntimeError,
            FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
