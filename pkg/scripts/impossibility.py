"""Dispersion of theta_hat and phi_hat as T grows with K fixed."""
import argparse

from ulrsvar.experiments import impossibility_demo


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--K", type=int, default=25)
    p.add_argument("--T", type=int, nargs="+", default=[7200, 28800])
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    tab = impossibility_demo(K=args.K, T_grid=tuple(args.T), reps=args.reps, seed=args.seed)
    print(f"{'T':>7} {'H_T':>5} {'IQR theta':>10} {'IQR phi':>9} {'median theta':>13}")
    for T, H, it, ip, mt in tab.rows():
        print(f"{T:7d} {H:5d} {it:10.4f} {ip:9.5f} {mt:13.4f}")
    print(f"IQR ratio last/first: theta {tab.theta_ratio:.3f}, phi {tab.phi_ratio:.3f}")


if __name__ == "__main__":
    main()
