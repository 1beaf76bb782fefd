#!/usr/bin/env python3
"""Constant-volatility arithmetic-Asian comparison (classic, antithetic,
geometric control variate, deterministic-vol drift)."""

import sys

from hestonis.cli import main

if __name__ == "__main__":
    args = ["price", "--preset", "appendixC", "--out", "table_constant_vol.csv"]
    sys.exit(main(args + sys.argv[1:]))
