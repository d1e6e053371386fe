"""Solve an SDPA sparse file with cvxpy, as an independent cross-check."""
import sys

import cvxpy as cp
import numpy as np


def read_sdpa(path):
    lines = [l for l in open(path) if not l.startswith(("*", '"'))]
    m = int(lines[0].split()[0])
    nb = int(lines[1].split()[0])
    dims = [abs(int(t)) for t in lines[2].replace(",", " ").split()[:nb]]
    c = np.array([float(t) for t in lines[3].replace(",", " ").split()[:m]])
    mats = [[np.zeros((d, d)) for d in dims] for _ in range(m + 1)]
    for l in lines[4:]:
        t = l.split()
        if len(t) < 5:
            continue
        k, b, i, j, v = int(t[0]), int(t[1]) - 1, int(t[2]) - 1, int(t[3]) - 1, float(t[4])
        mats[k][b][i, j] = v
        mats[k][b][j, i] = v
    return c, mats, dims


def main():
    c, mats, dims = read_sdpa(sys.argv[1])
    x = cp.Variable(len(c))
    cons = []
    for b, d in enumerate(dims):
        expr = -mats[0][b]
        for k in range(len(c)):
            if np.any(mats[k + 1][b]):
                expr = expr + x[k] * mats[k + 1][b]
        cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    print(f"{-prob.value:.12f}", prob.status)


if __name__ == "__main__":
    main()
