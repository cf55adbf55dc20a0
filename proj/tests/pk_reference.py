#!/usr/bin/env python3
"""Independent reference construction of the double-integrator relaxation.

Builds the order-k moment relaxation for

    xdot1 = x2, xdot2 = u, |u| <= 1, X = {|x|^2 <= 1.6^2}, X_T = {0}, T = 1

directly from the measure formulation with its own monomial bookkeeping,
then solves it with cvxpy. Used as an assembly/solver cross-check oracle.

usage: pk_reference.py <k> [solver]
"""

import itertools
import sys

import numpy as np
import cvxpy as cp

R2 = 1.6 * 1.6


def monos(nv, d):
    out = []
    for total in range(d + 1):
        for combo in itertools.product(range(total + 1), repeat=nv):
            if sum(combo) == total:
                out.append(combo)
    return out


def main():
    k = int(sys.argv[1])
    solver = sys.argv[2] if len(sys.argv) > 2 else "CLARABEL"
    d2 = 2 * k

    tx = monos(3, d2)   # (t, x1, x2)
    xm = monos(2, d2)   # (x1, x2)
    tx_idx = {m: i for i, m in enumerate(tx)}
    x_idx = {m: i for i, m in enumerate(xm)}

    # measures: sp, sm, sh, mu over (t,x); mu0, mu0h over x; mass of muT
    sp_ = cp.Variable(len(tx))
    sm_ = cp.Variable(len(tx))
    sh_ = cp.Variable(len(tx))
    mu = cp.Variable(len(tx))
    mu0 = cp.Variable(len(xm))
    mu0h = cp.Variable(len(xm))
    mT = cp.Variable()

    cons = []

    # Lebesgue moments over the disk of radius 1.6 (polar closed form).
    def leb(a, b):
        if a % 2 or b % 2:
            return 0.0
        from math import gamma, pi
        # int x^a y^b over disk R: R^(a+b+2)/(a+b+2) * 2*G((a+1)/2)G((b+1)/2)/G((a+b+2)/2)
        R = 1.6
        s = 2.0 * gamma((a + 1) / 2) * gamma((b + 1) / 2) / gamma((a + b + 2) / 2)
        return R ** (a + b + 2) / (a + b + 2) * s

    # Liouville rows: v = t^a x1^b x2^c, deg <= 2k.
    # Lf v = a t^(a-1) x1^b x2^c + b t^a x1^(b-1) x2^(c+1); Lg v = c t^a x1^b x2^(c-1)
    for (a, b, c) in tx:
        expr = 0
        if a > 0:
            expr = expr + a * mu[tx_idx[(a - 1, b, c)]]
        if b > 0:
            m2 = (a, b - 1, c + 1)
            if sum(m2) > d2:
                continue  # dropped row (truncation overflow)
            expr = expr + b * mu[tx_idx[m2]]
        if c > 0:
            m3 = (a, b, c - 1)
            expr = expr + c * (sp_[tx_idx[m3]] - sm_[tx_idx[m3]])
        # + <mu0, v(0,.)> : only a == 0 contributes
        if a == 0:
            expr = expr + mu0[x_idx[(b, c)]]
        # - <muT, v(1,.)> at the origin: only b == c == 0 contributes
        if b == 0 and c == 0:
            expr = expr - mT
        cons.append(expr == 0)

    # slack rows
    for m in tx:
        i = tx_idx[m]
        cons.append(sp_[i] + sm_[i] + sh_[i] - mu[i] == 0)
    # Lebesgue rows
    for (b, c) in xm:
        cons.append(mu0[x_idx[(b, c)]] + mu0h[x_idx[(b, c)]] == leb(b, c))

    def mom_mat(var, idx, base, deg):
        rows = [m for m in base if sum(m) <= deg]
        M = []
        for r in rows:
            row = []
            for s in rows:
                m = tuple(a + b for a, b in zip(r, s))
                row.append(var[idx[m]])
            M.append(row)
        return cp.bmat(M)

    def loc_mat(var, idx, base, deg, hterms):
        # hterms: list of (coef, mono) over the same ambient
        rows = [m for m in base if sum(m) <= deg]
        M = []
        for r in rows:
            row = []
            for s in rows:
                e = 0
                for coef, hm in hterms:
                    m = tuple(a + b + g for a, b, g in zip(r, s, hm))
                    e = e + coef * var[idx[m]]
                row.append(e)
            M.append(row)
        return cp.bmat(M)

    hX_tx = [(R2, (0, 0, 0)), (-1.0, (0, 2, 0)), (-1.0, (0, 0, 2))]
    hX_x = [(R2, (0, 0)), (-1.0, (2, 0)), (-1.0, (0, 2))]
    htau = [(1.0, (1, 0, 0)), (-1.0, (2, 0, 0))]

    for var in (sp_, sm_, sh_, mu):
        cons.append(mom_mat(var, tx_idx, tx, k) >> 0)
        cons.append(loc_mat(var, tx_idx, tx, k - 1, hX_tx) >> 0)
        cons.append(loc_mat(var, tx_idx, tx, k - 1, htau) >> 0)
    for var in (mu0, mu0h):
        cons.append(mom_mat(var, x_idx, xm, k) >> 0)
        cons.append(loc_mat(var, x_idx, xm, k - 1, hX_x) >> 0)
    cons.append(mT >= 0)

    prob = cp.Problem(cp.Maximize(mu0[0]), cons)
    kwargs = {}
    if solver == "SCS":
        kwargs = {"eps": 5e-10, "max_iters": 1000000}
    prob.solve(solver=getattr(cp, solver), **kwargs)
    print(f"pk_reference k={k} solver={solver} status={prob.status} value={prob.value:.10f}")


if __name__ == "__main__":
    main()
