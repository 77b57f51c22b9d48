"""Coverage of inverted belt sets and of the min-max and plug-in prediction bounds."""
import argparse

from ulrsvar.experiments import belt_coverage, minmax_coverage
from ulrsvar.prediction import build_belt


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--K", type=int, default=25)
    p.add_argument("--belt-reps", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--minmax-reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    args = p.parse_args()

    belt = build_belt(args.K, reps=args.belt_reps, seed=2024)
    for rho in (0.5, 0.9):
        cov = belt_coverage(belt, rho, 0.10, reps=args.reps, seed=args.seed)
        print(f"90% belt set, rho = {rho}: coverage {cov:.4f}")

    belt = build_belt(args.K, reps=args.belt_reps, seed=11)
    for theta, s, gamma in ((2.0, 2.0, 0.5), (0.5, 1.0, 1.0)):
        res = minmax_coverage(theta, s, args.K, gamma, 0.05, args.minmax_reps, seed=11, belt=belt)
        print(
            f"theta={theta} s={s} gamma={gamma}: Q* {res.q_star:.3f}, plug-in {res.plug_in:.3f}, "
            f"max decomposition error {res.max_identity_error:.1e}"
        )


if __name__ == "__main__":
    main()
