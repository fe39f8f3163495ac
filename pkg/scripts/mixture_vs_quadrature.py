"""Gaussian-mixture bound: closed form, numerical quadrature and sqrt(t ln(t/delta)).

Prints, for sigma = 1/2 and beta = 1, the smallest deviation d such that
ln E_F[exp(lam d - lam^2 V/2)] = KL + ln(1/delta) with F = N(0, beta), three ways.
"alt form" is sqrt((s/beta)(KL + ln(s/delta))) with s = 1 + beta V; it sits
below the quadrature value, so it is not a valid bound.  The last column is
the reference sqrt(t (KL + ln(t/delta))).

    python3 scripts/mixture_vs_quadrature.py [--kl 0] [--delta 0.05]
"""
import argparse
from math import log, sqrt

import numpy as np
from scipy import integrate, optimize

from anytime_pacbayes.forward import gaussian_mixture_rhs


def quadrature(v, beta, kl, delta):
    def log_mix(d):
        f = lambda lam: np.exp(lam * d - lam**2 * v / 2 - lam**2 / (2 * beta)) / sqrt(2 * np.pi * beta)
        return log(integrate.quad(f, -np.inf, np.inf, epsrel=1e-13, epsabs=0)[0])

    target = kl + log(1 / delta)
    hi = 1.0
    while log_mix(hi) < target:
        hi *= 2
    return optimize.brentq(lambda d: log_mix(d) - target, 0.0, hi, xtol=1e-14)


def short_form(v, beta, kl, delta):
    s = 1 + beta * v
    return sqrt(s / beta * (kl + log(s / delta)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kl", type=float, default=0.0)
    ap.add_argument("--delta", type=float, default=0.05)
    args = ap.parse_args()
    print(f"{'t':>6} {'closed':>10} {'quad':>10} {'alt form':>10} {'reference':>10}")
    for t in (2, 3, 5, 10, 100, 1000, 10000):
        v = t / 4.0
        row = (gaussian_mixture_rhs(v, 1.0, args.kl, args.delta), quadrature(v, 1.0, args.kl, args.delta),
               short_form(v, 1.0, args.kl, args.delta), sqrt(t * (args.kl + log(t / args.delta))))
        print(f"{t:>6} " + " ".join(f"{x:>10.5f}" for x in row))


if __name__ == "__main__":
    main()
