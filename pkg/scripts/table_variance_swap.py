#!/usr/bin/env python3
"""Variance-reduction table for the integrated-variance indicator payoff."""

import sys

from hestonis.cli import main

if __name__ == "__main__":
    args = ["price", "--preset", "varswap", "--out", "table_variance_swap.csv"]
    sys.exit(main(args + sys.argv[1:]))
