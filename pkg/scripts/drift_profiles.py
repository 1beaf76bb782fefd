#!/usr/bin/env python3
"""Dump the drift schedules of the main optimizers at one strike for inspection."""

import sys

from hestonis.cli import main

STRIKE = sys.argv[1] if len(sys.argv) > 1 else "60"

if __name__ == "__main__":
    for kind in ("BS", "LDPsn", "MDPsnLog", "MDPsn", "MDPlt"):
        out = f"drift_{kind}_K{STRIKE}.csv"
        rc = main(["drift", "--kind", kind, "--strike", STRIKE, "--out", out])
        print(f"{kind}: wrote {out}" if rc == 0 else f"{kind}: failed ({rc})")
