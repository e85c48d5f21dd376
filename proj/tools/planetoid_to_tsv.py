#!/usr/bin/env python3
"""Convert citation datasets into the TSV directory layout read by `rwl`.

Two input layouts are understood:

  npz        a single <name>.npz holding CSR arrays adj_* and attr_* plus
             `labels` (the layout used by the nettack / Pro-GNN releases)
  planetoid  the ind.<name>.{x,tx,allx,y,ty,ally,graph,test.index} files

Output: features.tsv (node, feature, value), edges.tsv (u, v with u < v),
labels.tsv (node, label). The largest connected component is left to the
loader (`lcc = true`).

    python3 tools/planetoid_to_tsv.py npz cora.npz data/cora
    python3 tools/planetoid_to_tsv.py planetoid raw/ cora data/cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_npz(path):
    with np.load(path, allow_pickle=True) as z:
        adj = sp.csr_matrix((z["adj_data"], z["adj_indices"], z["adj_indptr"]), shape=z["adj_shape"])
        if "attr_data" in z:
            feats = sp.csr_matrix((z["attr_data"], z["attr_indices"], z["attr_indptr"]), shape=z["attr_shape"])
        else:
            feats = sp.csr_matrix(z["attr_matrix"])
        labels = np.asarray(z["labels"]).astype(np.int64)
    return adj, feats, labels


def _unpickle(path):
    with open(path, "rb") as f:
        if sys.version_info > (3, 0):
            return pickle.load(f, encoding="latin1")
        return pickle.load(f)


def load_planetoid(root, name):
    root = Path(root)
    part = {k: _unpickle(root / f"ind.{name}.{k}") for k in ("x", "y", "tx", "ty", "allx", "ally", "graph")}
    test_index = [int(line) for line in (root / f"ind.{name}.test.index").read_text().split()]
    order = np.sort(test_index)

    tx, ty = part["tx"], part["ty"]
    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad them with zero rows.
        full = range(min(test_index), max(test_index) + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[order - min(order), :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[order - min(order), :] = ty
        tx, ty, order = tx_ext, ty_ext, np.array(list(full))

    feats = sp.vstack((part["allx"], tx)).tolil()
    feats[test_index, :] = feats[order, :]
    onehot = np.vstack((part["ally"], ty))
    onehot[test_index, :] = onehot[order, :]
    labels = onehot.argmax(axis=1).astype(np.int64)

    n = feats.shape[0]
    rows, cols = [], []
    for u, nbrs in part["graph"].items():
        for v in nbrs:
            if u < n and v < n:
                rows.append(u)
                cols.append(v)
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return adj, feats.tocsr(), labels


def write_tsv(adj, feats, labels, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    n = adj.shape[0]
    if feats.shape[0] != n or labels.shape[0] != n:
        raise SystemExit(f"inconsistent sizes: adj {adj.shape}, features {feats.shape}, labels {labels.shape}")

    sym = (adj + adj.T).tocoo()
    edges = sorted({(min(u, v), max(u, v)) for u, v in zip(sym.row.tolist(), sym.col.tolist()) if u != v})
    with open(out / "edges.tsv", "w") as f:
        f.writelines(f"{u}\t{v}\n" for u, v in edges)

    coo = feats.tocoo()
    entries = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    d = feats.shape[1]
    with open(out / "features.tsv", "w") as f:
        f.writelines(f"{i}\t{j}\t{repr(float(v))}\n" for i, j, v in entries if v != 0)
        if not any(j == d - 1 and v != 0 for _, j, v in entries):
            f.write(f"0\t{d - 1}\t0\n")  # pins the feature dimension

    with open(out / "labels.tsv", "w") as f:
        f.writelines(f"{i}\t{int(c)}\n" for i, c in enumerate(labels))
    print(f"{out}: {n} nodes, {len(edges)} edges, {d} features, {labels.max() + 1} classes")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="layout", required=True)
    a = sub.add_parser("npz")
    a.add_argument("file")
    a.add_argument("out")
    b = sub.add_parser("planetoid")
    b.add_argument("root")
    b.add_argument("name")
    b.add_argument("out")
    args = ap.parse_args()
    if args.layout == "npz":
        write_tsv(*load_npz(args.file), args.out)
    else:
        write_tsv(*load_planetoid(args.root, args.name), args.out)


if __name__ == "__main__":
    main()
