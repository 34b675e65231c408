#!/usr/bin/env python3
"""Four-mode permutation run (sigma = (2,4,3,1)) with reports in runs/exp2."""

import sys

from diracdrive.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "--id", "2", "--outdir", "runs/exp2", *sys.argv[1:]]))
