"""Run the four reference tables and write them as markdown and JSON.

Usage: python scripts/run_tables.py [--out DIR] [--tables 1 2 3 4] [--threads N]
"""

import argparse
import sys
from pathlib import Path

from stokesdd.experiments import format_table, run_table


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="output directory (default ./results)")
    ap.add_argument("--tables", type=int, nargs="+", default=[1, 2, 3, 4], choices=[1, 2, 3, 4])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = 0
    for t in args.tables:
        res = run_table(t, threads=args.threads)
        md = format_table(res, "md")
        (out / f"table{t}.md").write_text(md)
        (out / f"table{t}.json").write_text(format_table(res, "json"))
        print(md)
        code = max(code, res.exit_code)
    return code


if __name__ == "__main__":
    sys.exit(main())
