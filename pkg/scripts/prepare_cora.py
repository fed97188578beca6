#!/usr/bin/env python3
"""Convert the standard pickled Planetoid files for Cora into the plain text
formats this package reads (edge list, feature TSV, label and mask columns).

Expects a directory containing ind.cora.{x,tx,allx,y,ty,ally,graph,test.index}
as distributed with the original planetoid/GCN codebases, e.g.:

    python3 scripts/prepare_cora.py --raw-dir /path/to/data --out data/cora

Produces:
    edges.txt         one "u v" line per undirected edge
    features.tsv.gz   2708 x 1433 binary bag-of-words rows
    labels.txt        one class id per node
    train_mask.txt / val_mask.txt / test_mask.txt   one 0/1 per node

The split is the usual 140 train / 500 val / 1000 test.
"""

import argparse
import gzip
import pickle
from pathlib import Path

import numpy as np


def load_pickle(raw_dir, name):
    with open(Path(raw_dir) / f"ind.cora.{name}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--raw-dir", required=True, help="directory with ind.cora.* files")
    ap.add_argument("--out", required=True, help="output directory")
    args = ap.parse_args()

    allx = load_pickle(args.raw_dir, "allx")
    tx = load_pickle(args.raw_dir, "tx")
    ally = load_pickle(args.raw_dir, "ally")
    ty = load_pickle(args.raw_dir, "ty")
    graph = load_pickle(args.raw_dir, "graph")
    test_idx = np.loadtxt(Path(args.raw_dir) / "ind.cora.test.index", dtype=int)
    test_sorted = np.sort(test_idx)

    import scipy.sparse as sp
    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    features = np.asarray(features.todense())

    labels_oh = np.vstack((ally, ty))
    labels_oh[test_idx, :] = labels_oh[test_sorted, :]
    labels = labels_oh.argmax(axis=1)

    n = features.shape[0]
    train = np.zeros(n, dtype=int)
    val = np.zeros(n, dtype=int)
    test = np.zeros(n, dtype=int)
    train[:140] = 1
    val[140:640] = 1
    test[test_sorted] = 1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v:
                edges.add((min(u, v), max(u, v)))
    with open(out / "edges.txt", "w") as f:
        f.write("# cora citation graph, one undirected edge per line\n")
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")

    with gzip.open(out / "features.tsv.gz", "wt") as f:
        for row in features:
            f.write("\t".join(str(int(x)) for x in row) + "\n")

    np.savetxt(out / "labels.txt", labels, fmt="%d")
    np.savetxt(out / "train_mask.txt", train, fmt="%d")
    np.savetxt(out / "val_mask.txt", val, fmt="%d")
    np.savetxt(out / "test_mask.txt", test, fmt="%d")

    print(f"nodes={n} edges={len(edges)} classes={labels.max() + 1} "
          f"train={train.sum()} val={val.sum()} test={test.sum()}")


if __name__ == "__main__":
    main()
