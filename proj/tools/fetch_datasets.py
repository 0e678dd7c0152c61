#!/usr/bin/env python3
"""Download the benchmark graphs and write them as plain edge lists.

cora          Planetoid citation graph (2708 nodes) -> data/cora.edges
amazon_photo  Amazon co-purchase photo graph (7650 nodes) -> data/amazon_photo.edges

The pipeline takes the largest connected component itself, so the files hold
the full graphs. Amazon Photo needs numpy.
"""

import argparse
import io
import pickle
import sys
import urllib.request
from pathlib import Path

SOURCES = {
    "cora": "https://github.com/kimiyoung/planetoid/raw/master/data/ind.cora.graph",
    "amazon_photo": "https://github.com/shchur/gnn-benchmark/raw/master/data/npz/amazon_electronics_photo.npz",
}


def fetch(url):
    with urllib.request.urlopen(url, timeout=60) as response:
        return response.read()


def cora_edges(raw):
    # pickled {node: [neighbours]} written by Python 2
    adjacency = pickle.loads(raw, encoding="latin1")
    edges = set()
    for u, neighbours in adjacency.items():
        for v in neighbours:
            if u != v:
                edges.add((min(u, v), max(u, v)))
    return edges


def amazon_edges(raw):
    import numpy as np

    z = np.load(io.BytesIO(raw), allow_pickle=True)
    indptr, indices = z["adj_indptr"], z["adj_indices"]
    edges = set()
    for u in range(len(indptr) - 1):
        for v in indices[indptr[u]:indptr[u + 1]]:
            v = int(v)
            if u != v:
                edges.add((min(u, v), max(u, v)))
    return edges


PARSERS = {"cora": cora_edges, "amazon_photo": amazon_edges}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("datasets", nargs="*", default=["cora"],
                        help="any of: " + ", ".join(SOURCES) + " (default: cora)")
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data",
                        help="output directory (default: data/ in the repository)")
    args = parser.parse_args()
    unknown = [name for name in args.datasets if name not in SOURCES]
    if unknown:
        parser.error("unknown dataset " + ", ".join(unknown))

    args.out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for name in args.datasets:
        try:
            edges = PARSERS[name](fetch(SOURCES[name]))
        except Exception as err:  # network or format failure: report and keep going
            print(f"{name}: failed: {err}", file=sys.stderr)
            failures += 1
            continue
        path = args.out / f"{name}.edges"
        with open(path, "w") as f:
            f.write(f"# {name}: {len(edges)} undirected edges from {SOURCES[name]}\n")
            for u, v in sorted(edges):
                f.write(f"{u} {v}\n")
        print(f"{name}: wrote {len(edges)} edges to {path}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
