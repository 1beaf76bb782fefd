#!/usr/bin/env python3
"""Variance-reduction table for geometric Asian calls across the strike ladder.

Writes one CSV row per (strike, estimator kind). At the full 100k paths the
run takes on the order of fifteen minutes; pass --paths to scale down.
"""

import sys

from hestonis.cli import main

if __name__ == "__main__":
    args = ["price", "--preset", "table3", "--out", "table_geometric_asian.csv"]
    sys.exit(main(args + sys.argv[1:]))
