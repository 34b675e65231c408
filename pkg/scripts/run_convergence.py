#!/usr/bin/env python3
"""Self-convergence study of the moving-point solver into runs/convergence.csv."""

import sys

from diracdrive.cli import main

if __name__ == "__main__":
    sys.exit(main(["convergence", "--out", "runs/convergence.csv", *sys.argv[1:]]))
