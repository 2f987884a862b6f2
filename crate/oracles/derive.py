"""Independent reference values for the test suite.

Everything here is computed by brute force (dense quadrature, a generic LP
solver, scaling-form Sinkhorn on a wide fine grid) and shares no code with the
library. Run once; the output is committed as crates/core/tests/data/oracles.json.
"""

import json
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/data/oracles.json"


def normal_logpdf(x, m, v):
    return -0.5 * (x - m) ** 2 / v - 0.5 * np.log(2 * np.pi * v)


def joint_moments_through_kernel():
    # mu = N(0,1) pushed through y | x ~ N(alpha + beta x, tau) on a dense 2-D grid
    x = np.linspace(-10, 10, 1601)
    h = x[1] - x[0]
    out = {}
    for name, (alpha, beta, tau) in {"identity": (0.0, 1.0, 1.0), "affine": (1.0, 2.0, 3.0)}.items():
        y = np.linspace(-40, 40, 4001)
        hy = y[1] - y[0]
        w = np.exp(normal_logpdf(x[:, None], 0, 1) + normal_logpdf(y[None, :], alpha + beta * x[:, None], tau)) * h * hy
        w /= w.sum()
        mx, my = (w.sum(1) * x).sum(), (w.sum(0) * y).sum()
        cxx = (w.sum(1) * (x - mx) ** 2).sum()
        cyy = (w.sum(0) * (y - my) ** 2).sum()
        cxy = (w * np.outer(x - mx, y - my)).sum()
        out[name] = {"kernel": [alpha, beta, tau], "mean": [mx, my], "cov": [[cxx, cxy], [cxy, cyy]]}
    return out


def conditioning():
    # joint N(0, [[1,1],[1,2]]): conditional law of y given x on a dense grid
    y = np.linspace(-20, 20, 8001)
    prec = np.linalg.inv(np.array([[1.0, 1.0], [1.0, 2.0]]))
    rows = []
    for x in [-1.5, 0.0, 0.7, 2.0]:
        z = np.stack([np.full_like(y, x), y])
        logp = -0.5 * np.einsum("ij,ik,kj->j", z, prec, z)
        p = np.exp(logp - logp.max())
        p /= p.sum()
        m = (p * y).sum()
        rows.append({"x": x, "mean": m, "var": (p * (y - m) ** 2).sum()})
    return rows


def kl_values():
    nu, mu = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    bern = float((nu * np.log(nu / mu)).sum())
    x = np.linspace(-8, 8, 2000)
    p = np.exp(normal_logpdf(x, 0, 1))
    lr = normal_logpdf(x, 0, 1) - normal_logpdf(x, 1, 1)
    gauss = float(np.trapezoid(p * lr, x))
    return {"bernoulli": bern, "gaussian_shift": gauss}


def kernel_fisher():
    # J(K(x,.) | K(y,.)) for y | x ~ N(3x, 2), x - y = 1, by quadrature of the score gap
    t = np.linspace(-40, 40, 200001)
    x, y = 1.0, 0.0
    p = np.exp(normal_logpdf(t, 3 * x, 2.0))
    lr = normal_logpdf(t, 3 * x, 2.0) - normal_logpdf(t, 3 * y, 2.0)
    score = np.gradient(lr, t)
    return float(np.trapezoid(p * score**2, t))


def discretized_w2():
    x = np.linspace(-8, 8, 800)
    a = np.exp(normal_logpdf(x, 0, 1))
    b = np.exp(normal_logpdf(x, 0.5, 1))
    a, b = a / a.sum(), b / b.sum()
    # quantile coupling on a common grid, done by a merge
    fa, fb = np.cumsum(a), np.cumsum(b)
    levels = np.unique(np.concatenate([fa, fb, [0.0]]))
    levels = levels[levels <= 1.0]
    mids = 0.5 * (levels[1:] + levels[:-1])
    qa = x[np.minimum(np.searchsorted(fa, mids), len(x) - 1)]
    qb = x[np.minimum(np.searchsorted(fb, mids), len(x) - 1)]
    return float((np.diff(levels) * (qa - qb) ** 2).sum())


def lp_pairs():
    rng = np.random.default_rng(1234)
    out = []
    for _ in range(12):
        n, m = rng.integers(1, 9, size=2)
        xa = np.round(rng.uniform(-3, 3, n), 3)
        xb = np.round(rng.uniform(-3, 3, m), 3)
        xa, xb = np.unique(xa), np.unique(xb)
        wa = rng.uniform(0.05, 1, len(xa))
        wb = rng.uniform(0.05, 1, len(xb))
        wa, wb = wa / wa.sum(), wb / wb.sum()
        cost = (xa[:, None] - xb[None, :]) ** 2
        na, nb = len(xa), len(xb)
        eq = np.zeros((na + nb, na * nb))
        for i in range(na):
            eq[i, i * nb:(i + 1) * nb] = 1
        for j in range(nb):
            eq[na + j, j::nb] = 1
        res = linprog(cost.ravel(), A_eq=eq, b_eq=np.concatenate([wa, wb]), bounds=(0, None), method="highs")
        out.append({"x": xa.tolist(), "wx": wa.tolist(), "y": xb.tolist(), "wy": wb.tolist(), "w2_sq": float(res.fun)})
    return out


def sinkhorn_reference(mu_m, mu_v, eta_m, eta_v, beta, tau, steps):
    """Scaling-form Sinkhorn on [-10, 10] + shifts, 2001 nodes; P_0 = mu (x) K_0."""
    lo = min(mu_m - 12 * np.sqrt(mu_v), eta_m - 12 * np.sqrt(eta_v))
    hi = max(mu_m + 12 * np.sqrt(mu_v), eta_m + 12 * np.sqrt(eta_v))
    x = np.linspace(lo, hi, 2001)
    log_mu = normal_logpdf(x, mu_m, mu_v)
    log_mu -= logsumexp(log_mu)
    log_eta = normal_logpdf(x, eta_m, eta_v)
    log_eta -= logsumexp(log_eta)
    log_k = normal_logpdf(x[None, :], beta * x[:, None], tau)
    log_k -= logsumexp(log_k, axis=1, keepdims=True)
    log_p = log_mu[:, None] + log_k
    plans = [log_p]
    for n in range(1, 4000):
        if n % 2 == 1:
            log_p = log_p + (log_eta - logsumexp(log_p, axis=0))[None, :]
        else:
            log_p = log_p + (log_mu - logsumexp(log_p, axis=1))[:, None]
        if n <= steps:
            plans.append(log_p)
        err = np.abs(np.exp(logsumexp(log_p, axis=0)) - np.exp(log_eta)).sum() + np.abs(
            np.exp(logsumexp(log_p, axis=1)) - np.exp(log_mu)
        ).sum()
        if n > steps and err < 1e-13:
            break
    star = log_p
    p = np.exp(star)
    kl = [float((p * (star - q)).sum()) for q in plans]
    mx, my = (p.sum(1) * x).sum(), (p.sum(0) * x).sum()
    cxx = (p.sum(1) * (x - mx) ** 2).sum()
    cyy = (p.sum(0) * (x - my) ** 2).sum()
    cxy = (p * np.outer(x - mx, x - my)).sum()
    # conditional mean of y given x is affine for the Gaussian bridge; read it off the interior
    rows = p / p.sum(1, keepdims=True)
    cm = rows @ x
    cv = rows @ x**2 - cm**2
    inner = np.abs(x - mu_m) <= 3 * np.sqrt(mu_v)
    slope, intercept = np.polyfit(x[inner], cm[inner], 1)
    return {
        "mu": [mu_m, mu_v],
        "eta": [eta_m, eta_v],
        "beta": beta,
        "tau": tau,
        "mean": [mx, my],
        "cov": [[cxx, cxy], [cxy, cyy]],
        "cond_slope": float(slope),
        "cond_intercept": float(intercept),
        "cond_var": float(np.median(cv[inner])),
        "kl_trajectory": kl,
    }


def main():
    oracles = {
        "joint_through_kernel": joint_moments_through_kernel(),
        "conditioning": conditioning(),
        "kl": kl_values(),
        "kernel_fisher": kernel_fisher(),
        "discretized_w2_sq": discretized_w2(),
        "lp_pairs": lp_pairs(),
        "bridges": [
            sinkhorn_reference(0.0, 1.0, 2.0, 0.5, 1.0, 1.0, 12),
            sinkhorn_reference(0.0, 0.5, 1.0, 2.0, 0.5, 1.0, 30),
            sinkhorn_reference(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 10),
        ],
    }
    OUT.write_text(json.dumps(oracles, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
