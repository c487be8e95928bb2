"""Shared driver for the convergence scripts."""
import argparse
import time

from llgtps.cli import _write_tables
from llgtps.config import parse_overrides
from llgtps.experiments import run_preset


def study(preset, description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a setup field, e.g. ref_steps=640")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--csv", help="write the error table here")
    args = p.parse_args()
    t0 = time.time()
    setup, res = run_preset(preset, parse_overrides(args.set), threads=args.threads)
    ellg = preset == "ellg-rates"
    print(setup)
    print("k_ref = %.6g, %.0f s\n" % (setup.k_ref, time.time() - t0))
    for label, tab in res.tables.items():
        pairs = [("m", tab[0]), ("h", tab[1])] if ellg else [("m", tab)]
        for q, t in pairs:
            print("%s (%s)" % (label, q))
            for k, e, o in t.rows():
                print("  k = %-12.5g error = %-12.4e order = %s" % (k, e, "" if o != o else "%.3f" % o))
            print("  fitted order %.3f" % t.fitted_order())
    if args.csv:
        _write_tables(args.csv, res, ellg)
    return setup, res
