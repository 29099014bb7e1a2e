"""Compute frozen oracle values for the NIW predictive tests.

Numerically integrates the explicit NIW marginal (no Student-t formula
anywhere in this file) at fixed query points:

  d=1: p(x) = integral over (mu, s2) of N(x; mu, s2) N(mu; mun, s2/kn)
              InvGamma(s2; nun/2, Psin/2), via nested scipy quadrature.
  d=2: the mu-integral is collapsed with the elementary Gaussian
       convolution identity, then Sigma is integrated over its Cholesky
       parameterization on a tensor Gauss-Legendre grid.

Run from the repo root: python3 tools/compute_niw_oracles.py
"""

import math

import numpy as np
from scipy.integrate import quad


def posterior_params_1d(mu0, k0, nu0, psi0, data):
    data = np.asarray(data, dtype=float)
    n = data.size
    if n == 0:
        return mu0, k0, nu0, psi0
    xbar = data.mean()
    scatter = float(((data - xbar) ** 2).sum())
    kn = k0 + n
    mun = (k0 * mu0 + n * xbar) / kn
    psin = psi0 + scatter + (k0 * n / kn) * (xbar - mu0) ** 2
    return mun, kn, nu0 + n, psin


def marginal_1d(x, mun, kn, nun, psin):
    """Nested quadrature over (mu, s2)."""
    a, b = nun / 2.0, psin / 2.0
    log_ig_norm = a * math.log(b) - math.lgamma(a)

    def inner(s2):
        sd_obs = math.sqrt(s2)
        sd_mu = math.sqrt(s2 / kn)

        def integrand(mu):
            return (math.exp(-0.5 * ((x - mu) / sd_obs) ** 2)
                    / (sd_obs * math.sqrt(2 * math.pi))
                    * math.exp(-0.5 * ((mu - mun) / sd_mu) ** 2)
                    / (sd_mu * math.sqrt(2 * math.pi)))

        lo = min(x, mun) - 12 * max(sd_obs, sd_mu)
        hi = max(x, mun) + 12 * max(sd_obs, sd_mu)
        val, _ = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12,
                      limit=200)
        log_ig = log_ig_norm - (a + 1) * math.log(s2) - b / s2
        return val * math.exp(log_ig)

    # integrate over log(s2) for stability in the heavy tail
    def outer(u):
        s2 = math.exp(u)
        return inner(s2) * s2

    mode = math.log(b / (a + 1))
    val, _ = quad(outer, mode - 30, mode + 30, epsabs=1e-14, epsrel=1e-12,
                  limit=400)
    return val


def marginal_2d(x, mun, kn, nun, psin, nodes=240, hi=14.0, whi=12.0):
    """Bartlett-coordinate integration over Sigma after collapsing mu.

    p(x) = E_IW[N(x; mun, Sigma (kn+1)/kn)] with Sigma^-1 ~ Wishart(Psin^-1,
    nun) factored as C T T' C' (C = chol(Psin^-1), T lower triangular with
    independent chi diagonal and standard-normal subdiagonal). All three
    coordinates are light-tailed, so a tensor Gauss-Legendre grid converges;
    the earlier direct Cholesky grid truncated the heavy Sigma tail.
    """
    d = 2
    x = np.asarray(x, dtype=float)
    mun = np.asarray(mun, dtype=float)
    psin = np.asarray(psin, dtype=float)
    C = np.linalg.cholesky(np.linalg.inv(psin))
    logdet_c = math.log(C[0, 0]) + math.log(C[1, 1])
    s = (kn + 1.0) / kn
    g = C.T @ (x - mun)

    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)

    def axis(lo, hi_):
        return (0.5 * (hi_ - lo) * gl_x + 0.5 * (hi_ + lo),
                0.5 * (hi_ - lo) * gl_w)

    t11, w11 = axis(1e-12, hi)
    t22, w22 = axis(1e-12, hi)
    t21, w21 = axis(-whi, whi)

    def log_chi_pdf(t, k):
        # density of T with T^2 ~ chi-square(k)
        return ((1 - 0.5 * k) * math.log(2.0) + (k - 1) * np.log(t)
                - 0.5 * t * t - math.lgamma(0.5 * k))

    lp11 = log_chi_pdf(t11, nun)
    lp22 = log_chi_pdf(t22, nun - 1)
    lp21 = -0.5 * t21 * t21 - 0.5 * math.log(2 * math.pi)

    total = 0.0
    for i in range(nodes):
        a = t11[i]
        u0 = a * g[0] + t21 * g[1]
        q = u0[:, None] ** 2 + (t22[None, :] * g[1]) ** 2
        logdet_t = math.log(a) + np.log(t22)
        log_norm = (-0.5 * d * math.log(2 * math.pi * s)
                    + logdet_t[None, :] + logdet_c - 0.5 * q / s)
        lw = lp11[i] + lp21[:, None] + lp22[None, :] + log_norm
        total += float(np.sum(np.exp(lw) * (w21[:, None] * w22[None, :]))
                       * w11[i])
    return total


def main():
    print("# d=1, prior only: mu0=0 k0=1 nu0=3 psi0=2")
    for x in (0.0, 1.0, -2.5):
        val = marginal_1d(x, 0.0, 1.0, 3.0, 2.0)
        print(f"x={x:+.1f}  log p = {math.log(val):.12f}")

    print("# d=1, data {1,3}: posterior mun=4/3 kn=3 nun=5 psin=20/3")
    mun, kn, nun, psin = posterior_params_1d(0.0, 1.0, 3.0, 2.0, [1.0, 3.0])
    print(f"posterior: mun={mun} kn={kn} nun={nun} psin={psin}")
    for x in (0.0, 2.0):
        val = marginal_1d(x, mun, kn, nun, psin)
        print(f"x={x:+.1f}  log p = {math.log(val):.12f}")

    print("# d=2, prior only: mu0=(0,0) k0=1.5 nu0=4 psi0=[[2,.5],[.5,1.5]]")
    psi0 = np.array([[2.0, 0.5], [0.5, 1.5]])
    for x in ((0.0, 0.0), (1.0, -0.5)):
        for nodes in (160, 240):
            val = marginal_2d(np.array(x), np.zeros(2), 1.5, 4.0, psi0,
                              nodes=nodes)
            print(f"x={x}  nodes={nodes}  log p = {math.log(val):.10f}")

    print("# d=2 with data {(1,0),(2,1),(0,2)} under the same prior")
    data = np.array([[1.0, 0.0], [2.0, 1.0], [0.0, 2.0]])
    n = 3
    xbar = data.mean(axis=0)
    centered = data - xbar
    kn = 1.5 + n
    dev = xbar - np.zeros(2)
    psin = psi0 + centered.T @ centered + (1.5 * n / kn) * np.outer(dev, dev)
    mun = (1.5 * np.zeros(2) + n * xbar) / kn
    nun = 4.0 + n
    print(f"posterior: mun={mun} kn={kn} nun={nun} psin={psin.tolist()}")
    for x in ((0.0, 0.0), (1.5, 1.0)):
        for nodes in (160, 240):
            val = marginal_2d(np.array(x), mun, kn, nun, psin, nodes=nodes)
            print(f"x={x}  nodes={nodes}  log p = {math.log(val):.10f}")


if __name__ == "__main__":
    main()
