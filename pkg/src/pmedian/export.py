"""LP-format writers for the four interchangeable model formulations.

All writers emit deterministic CPLEX LP text (variables by index,
constraints by client then distance rank) so exports of the same instance
are byte-identical.  The four models:

* f1 -- classical assignment: binary openings plus client-site assignment
  fractions.
* f2 -- distance ranks: one indicator per (client, distinct distance) that
  no site within that radius is open; radius constraints accumulate all
  sites within the radius.
* f3 -- same variables, chained constraints that only mention sites at
  exactly one radius (much sparser matrix).
* f4 -- compact cut form: one assignment-distance variable per client and
  every optimality cut materialized.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import GuardExceeded
from .instance import Instance, Preprocessed, preprocess

EXPORT_ROW_GUARD = 2_000_000


def write_lp(inst: Instance, formulation: str, prep: Preprocessed | None = None) -> str:
    formulation = formulation.lower()
    if formulation == "f1":
        return _write_f1(inst)
    if prep is None:
        prep = preprocess(inst)
    if prep.total_distinct > EXPORT_ROW_GUARD:
        raise GuardExceeded(
            f"K = {prep.total_distinct} rows exceed the export guard "
            f"{EXPORT_ROW_GUARD}; export a smaller instance"
        )
    if formulation == "f2":
        return _write_f2(inst, prep, sparse=False)
    if formulation == "f3":
        return _write_f2(inst, prep, sparse=True)
    if formulation == "f4":
        return _write_f4(inst, prep)
    raise ValueError(f"unknown formulation {formulation!r}; expected f1..f4")


def _cardinality(out: io.StringIO, m: int, p: int) -> None:
    out.write(" open: " + " + ".join(f"y{j}" for j in range(m)) + f" = {p}\n")


def _write_f1(inst: Instance) -> str:
    n, m, p = inst.n_clients, inst.n_sites, inst.p
    out = io.StringIO()
    out.write("\\ p-median assignment model\n")
    out.write("Minimize\n obj: ")
    terms = []
    for i in range(n):
        for j in range(m):
            d = int(inst.dist[i, j])
            if d:
                terms.append(f"{d} x{i}_{j}")
            else:
                terms.append(f"0 x{i}_{j}")
    out.write(_wrap(" + ".join(terms)))
    out.write("\nSubject To\n")
    _cardinality(out, m, p)
    for i in range(n):
        row = " + ".join(f"x{i}_{j}" for j in range(m))
        out.write(f" assign{i}: {row} = 1\n")
    for i in range(n):
        for j in range(m):
            out.write(f" link{i}_{j}: x{i}_{j} - y{j} <= 0\n")
    out.write("Bounds\n")
    for i in range(n):
        for j in range(m):
            out.write(f" 0 <= x{i}_{j}\n")
    out.write("Binaries\n")
    out.write(_wrap(" ".join(f"y{j}" for j in range(m))))
    out.write("\nEnd\n")
    return out.getvalue()


def _write_f2(inst: Instance, prep: Preprocessed, sparse: bool) -> str:
    n, m, p = inst.n_clients, inst.n_sites, inst.p
    out = io.StringIO()
    out.write("\\ p-median distance-rank model" + (" (sparse chain)\n" if sparse else "\n"))
    out.write("Minimize\n obj: ")
    terms = []
    const = 0
    for i in range(n):
        dvals = prep.distinct(i)
        const += int(dvals[0])
        for t in range(len(dvals) - 1):
            terms.append(f"{int(dvals[t + 1] - dvals[t])} z{i}_{t + 1}")
    body = " + ".join(terms) if terms else ""
    if body:
        out.write(_wrap(body + f" + {const}"))
    else:
        out.write(str(const))
    out.write("\nSubject To\n")
    _cardinality(out, m, p)
    for i in range(n):
        dvals = prep.distinct(i)
        counts = prep.n_within(i)
        for t in range(len(dvals)):
            k = t + 1  # 1-based rank label
            if sparse:
                at_radius = prep.order[i, (counts[t - 1] if t else 0):counts[t]]
                ys = " + ".join(f"y{int(j)}" for j in sorted(int(v) for v in at_radius))
                if t == 0:
                    out.write(f" rad{i}_{k}: z{i}_{k} + {ys} >= 1\n")
                else:
                    out.write(f" rad{i}_{k}: z{i}_{k} - z{i}_{t} + {ys} >= 0\n")
            else:
                within = prep.order[i, :counts[t]]
                ys = " + ".join(f"y{int(j)}" for j in sorted(int(v) for v in within))
                out.write(f" rad{i}_{k}: z{i}_{k} + {ys} >= 1\n")
    out.write("Bounds\n")
    for i in range(n):
        for t in range(int(prep.K[i])):
            out.write(f" 0 <= z{i}_{t + 1}\n")
    out.write("Binaries\n")
    out.write(_wrap(" ".join(f"y{j}" for j in range(m))))
    out.write("\nEnd\n")
    return out.getvalue()


def _write_f4(inst: Instance, prep: Preprocessed) -> str:
    n, m, p = inst.n_clients, inst.n_sites, inst.p
    out = io.StringIO()
    out.write("\\ p-median compact cut model\n")
    out.write("Minimize\n obj: ")
    out.write(_wrap(" + ".join(f"t{i}" for i in range(n))))
    out.write("\nSubject To\n")
    _cardinality(out, m, p)
    for i in range(n):
        dvals = prep.distinct(i)
        counts = prep.n_within(i)
        for t in range(len(dvals)):
            rhs = int(dvals[t])
            if t == 0:
                out.write(f" cut{i}_{t}: t{i} >= {rhs}\n")
            else:
                n_in = int(counts[t - 1])
                pairs = sorted(
                    (int(j), rhs - int(d))
                    for j, d in zip(prep.order[i, :n_in], prep.sorted_dist[i, :n_in])
                )
                body = " + ".join(f"{c} y{j}" for j, c in pairs)
                out.write(f" cut{i}_{t}: t{i} + {body} >= {rhs}\n")
    out.write("Bounds\n")
    for i in range(n):
        out.write(f" 0 <= t{i}\n")
    out.write("Binaries\n")
    out.write(_wrap(" ".join(f"y{j}" for j in range(m))))
    out.write("\nEnd\n")
    return out.getvalue()


def _wrap(text: str, width: int = 200) -> str:
    """Break long expression lines; LP readers dislike very long lines."""
    if len(text) <= width:
        return text
    parts = text.split(" ")
    lines = []
    cur: list[str] = []
    used = 0
    for part in parts:
        if used + len(part) + 1 > width and cur:
            lines.append(" ".join(cur))
            cur, used = [], 0
        cur.append(part)
        used += len(part) + 1
    if cur:
        lines.append(" ".join(cur))
    return "\n   ".join(lines)


def count_model(inst: Instance, formulation: str, prep: Preprocessed | None = None) -> dict:
    """Variable/constraint counts of a formulation without writing the file."""
    n, m = inst.n_clients, inst.n_sites
    if prep is None:
        prep = preprocess(inst)
    k_total = prep.total_distinct
    formulation = formulation.lower()
    if formulation == "f1":
        return {"y": m, "x": n * m, "constraints": 1 + n * (1 + m)}
    if formulation in ("f2", "f3"):
        return {"y": m, "z": k_total, "constraints": 1 + k_total}
    if formulation == "f4":
        return {"y": m, "theta": n, "variables": n + m, "constraints": 1 + k_total}
    raise ValueError(f"unknown formulation {formulation!r}")
