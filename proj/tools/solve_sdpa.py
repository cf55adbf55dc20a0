#!/usr/bin/env python3
"""Reference solve of a sparse SDPA (.dat-s) file via cvxpy.

Solves the SDPA dual form with native cone variables,

    max tr(F_0 Y)  s.t.  tr(F_i Y) = c_i  for i = 1..m,   Y in PSD x nonneg,

which keeps the cone membership exact by construction (the primal form of
these moment relaxations has a degenerate optimal face that general-purpose
solvers exploit by leaving the cone). The SDPA primal variables x are
recovered from the multipliers of the trace constraints; strong duality makes
tr(F_0 Y*) equal min c^T x.

Output:
    * objective <value>        (min c^T x = tr(F0 Y*))
    * status <solver status>
    blocks <number of blocks>
    xvec <m>
    <m values, 17 significant digits>
"""

import sys

import numpy as np
import scipy.sparse as sp
import cvxpy as cp


def parse_sdpa(path):
    tokens = []
    with open(path) as f:
        for line in f:
            if line.startswith(('"', '*')):
                continue
            line = line.replace(',', ' ')
            tokens.extend(line.split())
    it = iter(tokens)
    m = int(next(it))
    nblocks = int(next(it))
    sizes = [int(next(it)) for _ in range(nblocks)]
    c = np.array([float(next(it)) for _ in range(m)])
    entries = []
    while True:
        try:
            matno = int(next(it))
        except StopIteration:
            break
        blk = int(next(it))
        i = int(next(it))
        j = int(next(it))
        v = float(next(it))
        entries.append((matno, blk, i, j, v))
    return m, sizes, c, entries


def main():
    if len(sys.argv) < 2:
        print("usage: solve_sdpa.py <file.dat-s> [solver]", file=sys.stderr)
        return 2
    m, sizes, c, entries = parse_sdpa(sys.argv[1])
    solver = sys.argv[2] if len(sys.argv) > 2 else "CLARABEL"

    per_block = {b: [] for b in range(1, len(sizes) + 1)}
    for (mn, blk, i, j, v) in entries:
        per_block[blk].append((mn, i, j, v))

    Ys = []
    terms = {i: [] for i in range(m + 1)}  # objective under key 0
    for b, size in enumerate(sizes, start=1):
        d = abs(size)
        Y = cp.Variable((d, d), PSD=True) if size > 0 else cp.Variable(d, nonneg=True)
        Ys.append(Y)
        F = {}
        for mn, i, j, v in per_block[b]:
            F.setdefault(mn, []).append((i - 1, j - 1, v))
        for mn, tr in F.items():
            if size > 0:
                rows = [t[0] for t in tr] + [t[1] for t in tr if t[0] != t[1]]
                cols = [t[1] for t in tr] + [t[0] for t in tr if t[0] != t[1]]
                vals = [t[2] for t in tr] + [t[2] for t in tr if t[0] != t[1]]
                M = sp.coo_matrix((vals, (rows, cols)), shape=(d, d)).toarray()
                terms[mn].append(cp.sum(cp.multiply(cp.Constant(M), Y)))
            else:
                for i, j, v in tr:
                    terms[mn].append(v * Y[i])

    cons = []
    con_of_var = {}
    for i in range(1, m + 1):
        if terms[i]:
            con = cp.sum(terms[i]) == c[i - 1]
            con_of_var[i] = len(cons)
            cons.append(con)
        elif abs(c[i - 1]) > 0:
            print("* status infeasible_free_variable")
            return 3

    objective = cp.Maximize(cp.sum(terms[0]) if terms[0] else 0)
    prob = cp.Problem(objective, cons)
    kwargs = {}
    if solver == "CLARABEL":
        kwargs = {"max_iter": 400}
    elif solver == "SCS":
        kwargs = {"eps": 1e-9, "max_iters": 500000}
    prob.solve(solver=getattr(cp, solver), **kwargs)
    if prob.value is None:
        print("* objective nan")
        print(f"* status {prob.status}")
        return 3
    print(f"* objective {prob.value:.17g}")
    print(f"* status {prob.status}")
    print(f"blocks {len(sizes)}")

    x = np.zeros(m)
    have_duals = all(cons[k].dual_value is not None for k in con_of_var.values())
    if have_duals:
        for i, k in con_of_var.items():
            x[i - 1] = float(np.asarray(cons[k].dual_value).ravel()[0])
        # cvxpy's multiplier sign convention for == in a Maximize problem:
        # check against the objective and flip if needed.
        if abs(-(c @ x) - prob.value) < abs(c @ x - prob.value):
            x = -x
    print(f"xvec {m}")
    vals = [f"{v:.17g}" for v in x]
    for k in range(0, len(vals), 8):
        print(" ".join(vals[k:k + 8]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
