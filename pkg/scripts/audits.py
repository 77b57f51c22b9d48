"""Local-mean variance diagnostic, spectrum normalisation audit and LTU tail table."""
import argparse
import math

from ulrsvar.experiments import local_mean_variance_check, ltu_classification, spectrum_audit
from ulrsvar.model_core import ULRParams
from ulrsvar.simulator import LTUVariant


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    ulr = ULRParams([[math.log(2.5) / 10]], [[1.0]], [[1.0]])
    print("local-mean variance, T = 7200, c = 0.5")
    print(f"{'H':>4} {'empirical':>10} {'predicted':>10} {'no exp':>10} {'exact':>10} {'ratio':>7} {'ratio2':>7}")
    for r in local_mean_variance_check(ulr, 0.5, [15, 30, 60, 120], 7200, args.reps, args.seed):
        mark = " *" if r.flagged else ""
        print(
            f"{r.H:4d} {r.empirical:10.5f} {r.predicted:10.5f} {r.predicted_corrected:10.5f} "
            f"{r.exact:10.5f} {r.ratio:7.3f} {r.ratio_corrected:7.3f}{mark}"
        )

    audit = spectrum_audit(seed=args.seed)
    print("\nspectrum audit (theta = 1, s = 1, T = 2)")
    for name, integral, var, factor in audit.rows():
        print(f"  {name:13s} integral {integral:.5f} simulated variance {var:.5f} factor {factor:.4f}")

    variants = [
        LTUVariant("ulr", c=1.0),
        LTUVariant("ltu_stationary", c=1.0),
        LTUVariant("ltu_scaled", c=1.0),
        LTUVariant("rw_scaled"),
        LTUVariant("random_walk"),
    ]
    print("\nLTU variants, A = 4")
    print(f"{'variant':>15} {'T':>6} {'tail':>7} {'se':>7} {'var(T/2)':>11} {'exact':>11}")
    for r in ltu_classification(variants, [1000, 10000], reps=2000, seed=args.seed):
        print(f"{r.tag:>15} {r.T:6d} {r.tail:7.4f} {r.tail_se:7.4f} {r.var_mid_empirical:11.4e} {r.var_mid_exact:11.4e}")


if __name__ == "__main__":
    main()
