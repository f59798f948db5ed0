#!/usr/bin/env python3
"""Run the frame-length sweep for the better oscillator (c_nu = 5e-18) at
inter-array SNRs of -15/-20 dB and write fig2.csv. Extra CLI flags pass
through (e.g. --realizations 1000 --seed 3 --out other.csv)."""

import sys

from otasync.cli import cli_main

if __name__ == "__main__":
    argv = sys.argv[1:]
    if not any(a.startswith("--out") for a in argv):
        argv = ["--out", "fig2.csv"] + argv
    sys.exit(cli_main(["--fig2"] + argv))
