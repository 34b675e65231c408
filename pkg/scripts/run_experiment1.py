#!/usr/bin/env python3
"""Three-mode permutation run (sigma = (2,3,1)) with reports in runs/exp1."""

import sys

from diracdrive.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "--id", "1", "--outdir", "runs/exp1", *sys.argv[1:]]))
