"""Regenerate classification_200.jsonl.

Each case below is written out by hand together with the status and core
column a reader assigns to it from the classification rules (at least two
rows, at least two columns, a column with at least two entity links, the
leftmost such column among those with the most links). Random variation only
changes sizes and cell text inside a case, never the expected answer.

Run: python3 tests/fixtures/make_classification_fixture.py
"""

import json
import random
from pathlib import Path

E = lambda i: {"e": f"dbp:E{i}"}
T = lambda s: {"t": s}


def grid(n_rows, n_cols, fill):
    return [[fill(i, j) for j in range(n_cols)] for i in range(n_rows)]


# name, expected relational, expected core column, builder(rng) -> (headings, rows)
CASES = [
    ("full entity column 0", True, 0,
     lambda r: (lambda n, m: grid(n, m, lambda i, j: E(i) if j == 0 else T(f"v{i}{j}")))(r.randint(2, 9), r.randint(2, 6))),
    ("single row", False, None,
     lambda r: grid(1, r.randint(2, 6), lambda i, j: E(j))),
    ("single column", False, None,
     lambda r: grid(r.randint(2, 9), 1, lambda i, j: E(i))),
    ("text only", False, None,
     lambda r: grid(r.randint(2, 9), r.randint(2, 6), lambda i, j: T(f"x{i}{j}"))),
    ("one link in the whole table", False, None,
     lambda r: grid(r.randint(2, 9), r.randint(2, 6), lambda i, j: E(0) if (i, j) == (1, 1) else T("x"))),
    ("tie 2-2 resolves leftmost", True, 0,
     lambda r: grid(r.randint(2, 6), 3, lambda i, j: E(i) if i < 2 and j < 2 else T("x"))),
    ("counts 1-3-2 picks middle", True, 1,
     lambda r: grid(r.randint(3, 7), 3, lambda i, j: E(i) if (j == 1 and i < 3) or (j == 2 and i < 2) or (j == 0 and i == 0) else T("y"))),
    ("2x2 with links in column 1", True, 1,
     lambda r: grid(2, 2, lambda i, j: E(i) if j == 1 else T(f"n{i}"))),
    ("no rows", False, None,
     lambda r: []),
    ("links only in last column with blanks", True, 2,
     lambda r: grid(r.randint(2, 8), 3, lambda i, j: E(i) if j == 2 else T("" if (i + j) % 2 else "z"))),
]


def main():
    rng = random.Random(20240101)
    out = Path(__file__).with_name("classification_200.jsonl")
    lines = []
    for k in range(200):
        name, label, core, build = CASES[k % len(CASES)]
        rows = build(rng)
        n_cols = len(rows[0]) if rows else rng.randint(2, 4)
        rec = {"id": f"C{k:03d}", "caption": name, "pageTitle": "fixture",
               "headings": [f"h{j}" for j in range(n_cols)], "rows": rows,
               "expected_relational": label, "expected_core": core}
        lines.append(json.dumps(rec, sort_keys=True))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
