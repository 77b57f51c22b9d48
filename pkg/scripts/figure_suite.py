"""Write the path, local-mean and ACF artifacts for a preset or spec file."""
import argparse

from ulrsvar.experiments import resolve_spec, run_fig_suite


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("spec", nargs="?", default="bivariate", help="preset name or spec file")
    p.add_argument("--out", default="out/figures")
    p.add_argument("--svg", action="store_true")
    args = p.parse_args()
    res = run_fig_suite(resolve_spec(args.spec), args.out, svg=args.svg)
    print(f"spec_hash {res.spec_hash}")
    print(f"correlation of the local-mean series: {res.means_correlation:.3f}")
    for name, path in sorted(res.files.items()):
        print(f"  {name:20s} {path}")


if __name__ == "__main__":
    main()
