"""Run the reference experiments and print one verdict line each.

    python3 scripts/run_acceptance.py              # all criteria
    python3 scripts/run_acceptance.py 1 6 7        # a selection
    python3 scripts/run_acceptance.py --json out.json
"""

import argparse
import json
import sys

from qjump import experiments as E


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    ap.add_argument("--json", help="write statistics and fingerprints here")
    args = ap.parse_args(argv)
    chosen = args.criteria or sorted(E.ALL)
    unknown = [n for n in chosen if n not in E.ALL]
    if unknown:
        ap.error(f"no experiment for criteria {unknown}")
    results = []
    for n in chosen:
        res = E.ALL[n]()
        print(res.line(), flush=True)
        results.append(res)
    if args.json:
        payload = [
            {
                "criterion": r.number,
                "passed": r.passed,
                "seed": r.seed,
                "statistic": [float(v) for v in r.statistic],
                "fingerprint": r.fingerprint(),
                "elapsed_s": r.elapsed,
            }
            for r in results
        ]
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
