"""Discretization errors of the direct global solve on n = 16, 32, 64 pressure cells."""

import argparse
import json

from stokesdd.experiments import convergence_study


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--pressure", choices=["continuous", "discontinuous"], default="continuous")
    args = ap.parse_args(argv)
    print(json.dumps(convergence_study(tuple(args.levels), args.pressure), indent=2))


if __name__ == "__main__":
    main()
