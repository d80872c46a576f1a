"""Rate at which degree-1 beats degree-2 on AIC and BIC when the data are degree-1.

The degree-2 model nests degree-1, so with Gaussian noise the likelihood-ratio
statistic is chi-square with one degree of freedom.  AIC prefers degree-1
exactly when that statistic is below 2, and BIC when it is below ln(n).

    python scripts/aic_monte_carlo.py --trials 2000
"""

import argparse
import math

from scipy import stats

from cascade_forensics.rdd import fit_rdd
from cascade_forensics.synth.fixtures import step_series


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--n", type=int, default=80)
    ap.add_argument("--sigma", type=float, default=0.2)
    args = ap.parse_args()
    x0 = args.n // 2 - 1
    aic = bic = both = 0
    for s in range(args.trials):
        x, y = step_series(n=args.n, x0=x0, intercept=1.0, beta=-0.5, slope=0.01, sigma=args.sigma, seed=s).data
        d1, d2 = fit_rdd(x, y, x0, 1), fit_rdd(x, y, x0, 2)
        aic += d1.aic < d2.aic
        bic += d1.bic < d2.bic
        both += d1.aic < d2.aic and d1.bic < d2.bic
    t = args.trials
    print(f"trials={t} aic={aic / t:.3f} bic={bic / t:.3f} both={both / t:.3f}")
    print(f"theory: aic={stats.chi2.cdf(2.0, 1):.3f} bic={stats.chi2.cdf(math.log(args.n), 1):.3f}")
    print(f"P(>= 90 of 100 | p={stats.chi2.cdf(2.0, 1):.3f}) = "
          f"{stats.binom.sf(89, 100, stats.chi2.cdf(2.0, 1)):.4f}")


if __name__ == "__main__":
    main()
