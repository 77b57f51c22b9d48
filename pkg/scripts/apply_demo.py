"""Run the application pipeline on a synthetic persistent series written to CSV."""
import argparse
from pathlib import Path

import numpy as np

from ulrsvar.pipeline_app import apply_pipeline
from ulrsvar.rng import normals, stream


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=int, default=660)
    p.add_argument("--out", default="out/apply")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    z = normals(stream(args.seed, "apply-demo"), (args.T, 2))
    x = np.zeros((args.T, 2))
    for t in range(1, args.T):
        x[t] = np.array([0.995, 0.97]) * x[t - 1] + z[t]
    src = out / "input.csv"
    src.write_text("date,slow,medium\n" + "".join(f"{t},{a!r},{b!r}\n" for t, (a, b) in enumerate(x.tolist())))
    res = apply_pipeline(src, out)
    for row in res.intervals:
        w = row.widths()
        print(f"{row.name:8s} widths raw {w[0]:.2f} plug-in {w[1]:.2f} min-max {w[2]:.2f} flags {';'.join(row.flags) or '-'}")


if __name__ == "__main__":
    main()
