#!/usr/bin/env python3
"""Write synthetic graphs as edge lists plus XSGRAPH1 caches.

    python3 scripts/make_graphs.py --out data/ --kind er --n 200 --degree 5 --count 3
    python3 scripts/make_graphs.py --out data/ --kind powerlaw --n 100000 --arcs 1250000
"""
import argparse
from pathlib import Path

from exactsim.generators import erdos_renyi_digraph, erdos_renyi_undirected, power_law_digraph
from exactsim.graph import save_binary, save_edge_list


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--kind", choices=["er", "er-undirected", "powerlaw"], default="er")
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--degree", type=float, default=5.0)
    ap.add_argument("--arcs", type=int, default=1_250_000, help="sampled arcs for powerlaw (before dedup)")
    ap.add_argument("--count", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    a.out.mkdir(parents=True, exist_ok=True)
    for t in range(a.count):
        seed = a.seed + t
        if a.kind == "er":
            g = erdos_renyi_digraph(a.n, a.degree, seed)
        elif a.kind == "er-undirected":
            g = erdos_renyi_undirected(a.n, a.degree, seed)
        else:
            g = power_law_digraph(a.n, a.arcs, seed)
        stem = a.out / f"{a.kind}_n{a.n}_s{seed}"
        save_edge_list(g, stem.with_suffix(".txt"))
        save_binary(g, stem.with_suffix(".bin"))
        print(f"{stem}.bin n={g.n} m={g.m}")


if __name__ == "__main__":
    main()
