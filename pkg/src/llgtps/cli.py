"""Command line interface: run, converge, validate, mesh-report."""
import argparse
import csv
import sys
import time
from pathlib import Path

from . import config as C
from .experiments import PRESETS, run_preset
from .mesh import mesh_summary
from .presets import RUN_PRESETS


def _load(args):
    base = None
    if getattr(args, "preset", None):
        if args.preset not in RUN_PRESETS:
            raise C.ConfigError("unknown run preset %r (choose from %s)" % (args.preset, ", ".join(RUN_PRESETS)))
        base = C.apply_settings(C.RunConfig(), RUN_PRESETS[args.preset])
    return C.load_config(args.config, args.set or [], base=base)


def cmd_run(args):
    from .app import Simulation
    cfg = _load(args)
    out = args.out or cfg.output.dir
    sim = Simulation(cfg)
    t0 = time.time()
    state = sim.run(out)
    print("wrote %s/trajectory.csv (%d steps, %.1f s)" % (out, state.i, time.time() - t0))
    return 0


def _write_tables(path, res, ellg):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "quantity", "k", "error", "order"])
        for label, tab in res.tables.items():
            pairs = [("m_H1", tab[0]), ("h_Hcurl", tab[1])] if ellg else [("m", tab)]
            for q, t in pairs:
                for k, e, o in t.rows():
                    w.writerow([label, q, repr(k), repr(e), "" if o != o else repr(o)])


def cmd_converge(args):
    settings = C.parse_overrides(args.set or [])
    t0 = time.time()
    setup, res = run_preset(args.preset, settings, threads=args.threads)
    ellg = args.preset == "ellg-rates"
    print("preset %s: k_ref = %g, T = %g (%.1f s)" % (args.preset, setup.k_ref, setup.T, time.time() - t0))
    for label, tab in res.tables.items():
        pairs = [("m H1(omega)", tab[0]), ("h H(curl)(Omega)", tab[1])] if ellg else [("m %s" % setup.norm, tab)]
        for q, t in pairs:
            orders = " ".join("%.2f" % o for o in t.orders)
            print("%-10s %-18s fitted order %.3f   pairwise %s" % (label, q, t.fitted_order(), orders))
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / ("eoc_%s.csv" % args.preset)
    _write_tables(path, res, ellg)
    (out / ("eoc_%s_setup.txt" % args.preset)).write_text(repr(setup) + "\n")
    print("wrote %s" % path)
    return 0


def cmd_validate(args):
    from .validation import run_all
    ok = True
    for name, passed, detail in run_all():
        ok &= passed
        print("%s  %s %s" % ("PASS" if passed else "FAIL", name, ("(" + detail + ")") if detail else ""))
    return 0 if ok else 1


def cmd_mesh_report(args):
    from .app import build_mesh
    cfg = _load(args)
    mesh, sub = build_mesh(cfg)
    print(mesh_summary(mesh))
    if sub is not None:
        print("inner tets      %d" % len(sub.inner_tets))
        print("inner vertices  %d" % len(sub.inner_vertices))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="llgtps", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset_choices=None):
        sp.add_argument("--config", help="INI or JSON configuration file")
        sp.add_argument("--preset", choices=preset_choices)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a setting")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")

    common(sub.add_parser("run", help="run one simulation"), sorted(RUN_PRESETS))
    c = sub.add_parser("converge", help="temporal convergence study")
    common(c, sorted(PRESETS))
    sub.add_parser("validate", help="run built-in self-checks")
    common(sub.add_parser("mesh-report", help="print mesh statistics"), sorted(RUN_PRESETS))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "converge": cmd_converge, "validate": cmd_validate,
                "mesh-report": cmd_mesh_report}
    if args.command == "converge" and not args.preset:
        print("error: converge needs --preset", file=sys.stderr)
        return 2
    try:
        return handlers[args.command](args)
    except (C.ConfigError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
