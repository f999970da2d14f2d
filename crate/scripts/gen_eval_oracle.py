#!/usr/bin/env python3
"""Generate high-precision reference values for the bundled formula fixtures.

Evaluates each fixture formula with mpmath at 60 significant digits and
freezes (inputs, expected) rows into crates/core/tests/data/eval_oracle.csv.
Constants are taken as the IEEE-754 doubles the decimal literals denote, so
the reference isolates the evaluator's own floating-point error.

The formulas here are written out as plain Python/mpmath expressions on
purpose: they must not go through the Rust parser or evaluator under test.
"""

import random
from mpmath import mp, mpf, cos

mp.dps = 60

OUT = "crates/core/tests/data/eval_oracle.csv"
SEED = 20250809
ROWS = 100
MIN_ABS = 0.01  # reject draws where any formula lands near zero (relative-error comparisons)


def c(text):
    """A decimal literal as the exact mpf of its f64 value."""
    return mpf(float(text))


def fmin(a, b):
    return a if a <= b else b


FORMULAS = [
    ("MST",
     lambda v: v["MST"]),
    ("0.99*MST",
     lambda v: c("0.99") * v["MST"]),
    ("MST - cos(MSDMT)",
     lambda v: v["MST"] - cos(v["MSDMT"])),
    ("0.51 + 0.96*MST",
     lambda v: c("0.51") + c("0.96") * v["MST"]),
    ("0.55 + 0.95*MST - cos(MSDMT)",
     lambda v: c("0.55") + c("0.95") * v["MST"] - cos(v["MSDMT"])),
    ("MYT - 6.67 - 5.28*S*cos(0.55 + S)",
     lambda v: v["MYT"] - c("6.67") - c("5.28") * v["S"] * cos(c("0.55") + v["S"])),
    ("MYT - 7.00 - cos(4884.11*Y)*min(cos(0.48*Y), cos(0.28*Y)) - 5.41*S*cos(0.54 + S)",
     lambda v: v["MYT"] - c("7.00")
     - cos(c("4884.11") * v["Y"]) * fmin(cos(c("0.48") * v["Y"]), cos(c("0.28") * v["Y"]))
     - c("5.41") * v["S"] * cos(c("0.54") + v["S"])),
    ("0.84*MYT - 4.34 - cos(4884.11*Y)*cos(2.584 + 0.84*MYT) - 5.32*S*cos(0.54 + S)",
     lambda v: c("0.84") * v["MYT"] - c("4.34")
     - cos(c("4884.11") * v["Y"]) * cos(c("2.584") + c("0.84") * v["MYT"])
     - c("5.32") * v["S"] * cos(c("0.54") + v["S"])),
    ("MYT - 6.66 - cos(4884.10*Y)*cos(0.58*MYT) - 5.32*S*cos(0.54 + S)",
     lambda v: v["MYT"] - c("6.66")
     - cos(c("4884.10") * v["Y"]) * cos(c("0.58") * v["MYT"])
     - c("5.32") * v["S"] * cos(c("0.54") + v["S"])),
    ("7.77 + 0.64*cos(4951.06*Y) - cos(MYT) - 5.33*S*cos(0.54 + S)",
     lambda v: c("7.77") + c("0.64") * cos(c("4951.06") * v["Y"])
     - cos(v["MYT"]) - c("5.33") * v["S"] * cos(c("0.54") + v["S"])),
]


def draw_row(rng):
    return {
        "Y": float(rng.randint(1925, 2012)),
        "S": float(rng.randint(1, 4)),
        "MST": rng.uniform(0.5, 30.0),
        "MSDMT": rng.uniform(5.0, 40.0),
        "MSDmT": rng.uniform(-10.0, 20.0),
        "MYT": rng.uniform(10.0, 20.0),
        "MSR": rng.uniform(0.0, 1000.0),
        "NSRD": float(rng.randint(0, 90)),
    }


def main():
    rng = random.Random(SEED)
    rows = []
    while len(rows) < ROWS:
        raw = draw_row(rng)
        v = {k: mpf(x) for k, x in raw.items()}
        values = [f(v) for _, f in FORMULAS]
        if any(abs(val) < MIN_ABS for val in values):
            continue  # redraw: keep every comparison well away from zero
        rows.append((raw, values))

    with open(OUT, "w") as fh:
        fh.write("formula_idx,y,s,mst,msdmt,msdmt_min,myt,msr,nsrd,expected\n")
        for raw, values in rows:
            for idx, val in enumerate(values):
                fh.write(
                    "%d,%r,%r,%r,%r,%r,%r,%r,%r,%s\n"
                    % (idx, raw["Y"], raw["S"], raw["MST"], raw["MSDMT"],
                       raw["MSDmT"], raw["MYT"], raw["MSR"], raw["NSRD"],
                       mp.nstr(val, 25))
                )
    print("wrote %s (%d rows x %d formulas)" % (OUT, ROWS, len(FORMULAS)))

    # Spot value used by a unit test: formula 10 at Y=2005, MYT=15, S=2.
    v = {"Y": mpf(2005), "S": mpf(2), "MYT": mpf(15), "MST": mpf(0),
         "MSDMT": mpf(0), "MSDmT": mpf(0), "MSR": mpf(0), "NSRD": mpf(0)}
    print("solution10(Y=2005, MYT=15, S=2) =", mp.nstr(FORMULAS[9][1](v), 25))


if __name__ == "__main__":
    main()
