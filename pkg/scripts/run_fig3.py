#!/usr/bin/env python3
"""Run the frame-length sweep for the lower-quality oscillator
(c_nu = 1.58e-17) and write fig3.csv. Extra CLI flags pass through."""

import sys

from otasync.cli import cli_main

if __name__ == "__main__":
    argv = sys.argv[1:]
    if not any(a.startswith("--out") for a in argv):
        argv = ["--out", "fig3.csv"] + argv
    sys.exit(cli_main(["--fig3"] + argv))
