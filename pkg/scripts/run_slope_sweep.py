#!/usr/bin/env python3
"""Crossing-traversal slope sweep (fixed horizon 0.01) into runs/sweep."""

import sys

from diracdrive.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "--id", "sweep", "--outdir", "runs/sweep", *sys.argv[1:]]))
