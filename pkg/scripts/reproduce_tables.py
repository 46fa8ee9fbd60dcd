"""Run the reference experiments and print estimate-versus-exact tables.

    python3 scripts/reproduce_tables.py                 # every table
    python3 scripts/reproduce_tables.py rectangle shell # a subset
    python3 scripts/reproduce_tables.py --json out.json box3d
"""
import argparse
import json
import sys
import warnings

from minktensor import experiments as ex

TABLES = {
    "rectangle": lambda a: ex.rectangle(renditions=a.renditions or 10, seed=a.seed),
    "box3d": lambda a: ex.box3d(renditions=a.renditions or 10, seed=a.seed),
    "shell": lambda a: ex.shell(renditions=a.renditions or 10, seed=a.seed),
    "cut_box": lambda a: ex.cut_box(renditions=a.renditions or 10, seed=a.seed),
    "direct_box": lambda a: ex.direct_surface("box", renditions=a.renditions or 3, seed=a.seed),
    "direct_shell": lambda a: ex.direct_surface("shell", renditions=a.renditions or 3, seed=a.seed),
    "direct_cut_box": lambda a: ex.direct_surface("cut_box", renditions=a.renditions or 3, seed=a.seed),
    "unbiasedness": lambda a: ex.unbiasedness(),
    "steiner": lambda a: ex.steiner_exactness(),
    "beta": lambda a: ex.beta_polytopes(realizations=a.renditions or 25, seed=a.seed),
    "heightfield_flat": lambda a: ex.heightfield_plane(0.0, renditions=a.renditions or 2, seed=a.seed),
    "heightfield_tilted": lambda a: ex.heightfield_plane(1.0, renditions=a.renditions or 2, seed=a.seed),
    "disk_convergence": lambda a: ex.disk_convergence(),
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("tables", nargs="*", metavar="TABLE", help="any of: " + ", ".join(TABLES))
    p.add_argument("--renditions", type=int, help="override the per-table default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write all results to this file")
    args = p.parse_args(argv)
    unknown = sorted(set(args.tables) - set(TABLES))
    if unknown:
        p.error(f"unknown table(s): {', '.join(unknown)}")
    names = args.tables or list(TABLES)
    results = []
    for name in names:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = TABLES[name](args)
        print(res.table(), end="\n\n", flush=True)
        results.append(res.to_dict())
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
