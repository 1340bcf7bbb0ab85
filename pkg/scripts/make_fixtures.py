"""Regenerate the JSON fixtures shipped in ``src/plavoid/fixtures``."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from plavoid.bundle import circle_base
from plavoid.io import complex_to_json, dump_json
from plavoid.matrix import torus_complex

OUT = Path(__file__).resolve().parents[1] / "src" / "plavoid" / "fixtures"


def rows(a):
    return [[repr(float(x)) for x in r] for r in np.asarray(a)]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    dump_json({"mode": "avoid-zero", "seed": 0,
               "complex": {"vertices": [["0"], ["1"]], "simplices": [[0, 1]]},
               "f": [["-1"], ["1"]], "eps": "1/10"}, OUT / "interval_line.json")

    rng = np.random.default_rng(7)
    square = {"vertices": [["0", "0"], ["1", "0"], ["0", "1"], ["1", "1"]], "simplices": [[0, 1, 2], [1, 2, 3]]}
    dump_json({"mode": "avoid-zero", "seed": 0, "complex": square,
               "f": rows(np.round(rng.uniform(-1, 1, (4, 3)), 3)), "eps": "1/5"},
              OUT / "square_avoid_zero.json")

    dump_json({"mode": "glue", "seed": 0, "complex": {"vertices": [["0"]], "simplices": [[0]]},
               "f": [["0", "1"]], "eps": "1/10",
               "target": {"kind": "sphere-point", "z": ["0", "1"], "name": "north"}},
              OUT / "circle_glue.json")

    n = 24
    half = n // 2
    base = circle_base(n)
    flip = [["1", "0", "0"], ["0", "-1", "0"], ["0", "0", "-1"]]
    ident = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]
    bundle = {"base": complex_to_json(base),
              "patches": [list(range(0, half + 1)) + [n - 1], list(range(half - 1, n)) + [0]],
              "fiber": {"kind": "subspace", "A": ident, "c": ["0", "0", "0"], "q": 2, "name": "axis"},
              "transitions": [{"to": 0, "from": 1, "vertices": [half - 1, half], "M": flip},
                              {"to": 0, "from": 1, "vertices": [n - 1, 0], "M": ident}],
              "section": [[["0", "0", "0"]] * n, [["0", "0", "0"]] * n]}
    dump_json({"mode": "section", "seed": 0, "bundle": bundle, "eps": "1/10"}, OUT / "mobius.json")

    K = torus_complex(7)
    eye = [[["1", "0"], ["0", "0"]], [["0", "0"], ["1", "0"]]]
    dump_json({"mode": "su2-split", "seed": 1, "complex": complex_to_json(K),
               "field": [eye] * K.n_vertices, "eps": "1/10"}, OUT / "torus_su2.json")

    # expected report for the shipped torus demo
    from plavoid.cli import demo_config, run
    dump_json(run(demo_config("torus"))[0], OUT / "torus_report.golden.json")


if __name__ == "__main__":
    main()
