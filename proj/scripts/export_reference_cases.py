#!/usr/bin/env python3
"""Export the PYPOWER copies of the MATPOWER test cases as MATPOWER .m text
and record independently solved bus voltages for the regression tests.

Requires: pip install pypower
Usage: scripts/export_reference_cases.py <matpower_out_dir> <reference_out_dir>
"""
import importlib
import json
import math
import sys
from pathlib import Path

import numpy as np
from pypower.api import ppoption, runpf

CASES = ["case9", "case14", "case30", "case39", "case57", "case118", "case300"]


def fmt(v):
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    return repr(float(v)) if v != int(v) else str(int(v))


def write_table(out, name, table, comment):
    out.write(f"\n%% {comment}\n")
    out.write(f"mpc.{name} = [\n")
    for row in table:
        out.write("\t" + "\t".join(fmt(v) for v in row) + ";\n")
    out.write("];\n")


def export_case(name, mdir, rdir):
    ppc = getattr(importlib.import_module("pypower." + name), name)()
    path = mdir / f"{name}.m"
    with path.open("w") as out:
        out.write(f"function mpc = {name}\n")
        out.write(f"%{name.upper()}  Power flow data, exported from PYPOWER.\n\n")
        out.write("%% MATPOWER Case Format : Version 2\n")
        out.write("mpc.version = '2';\n\n")
        out.write("%%-----  Power Flow Data  -----%%\n")
        out.write("%% system MVA base\n")
        out.write(f"mpc.baseMVA = {fmt(ppc['baseMVA'])};\n")
        write_table(out, "bus", ppc["bus"],
                    "bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
        write_table(out, "gen", ppc["gen"],
                    "generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin")
        write_table(out, "branch", ppc["branch"],
                    "branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax")
        if "gencost" in ppc:
            write_table(out, "gencost", ppc["gencost"], "generator cost data")

    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-12, PF_MAX_IT=30, ENFORCE_Q_LIMS=0)
    res, ok = runpf(ppc, opt)
    if not ok:
        raise SystemExit(f"reference solver failed on {name}")
    bus = res["bus"]
    ref = {
        "name": name,
        "solver": "PYPOWER runpf (Newton, tol 1e-12, no Q limits)",
        "bus_ids": [int(b) for b in bus[:, 0]],
        "Vm": [float(v) for v in bus[:, 7]],
        "Va": [float(np.deg2rad(v)) for v in bus[:, 8]],
    }
    (rdir / f"{name}_solution.json").write_text(json.dumps(ref, indent=1) + "\n")
    print(f"{name}: {bus.shape[0]} buses, {res['branch'].shape[0]} branches")


def main():
    mdir, rdir = Path(sys.argv[1]), Path(sys.argv[2])
    mdir.mkdir(parents=True, exist_ok=True)
    rdir.mkdir(parents=True, exist_ok=True)
    for name in CASES:
        export_case(name, mdir, rdir)


if __name__ == "__main__":
    main()
