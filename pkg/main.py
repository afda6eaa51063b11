#!/usr/bin/env python3
"""
Causal rules - command-line entry point.

Learns interpretable causal rules ("IF sex == female AND fare > 26.0 THEN τ = 0.41")
from observational CSV data. Run `python main.py --help` for the subcommands.
"""

import sys

from causal_rules.cli import main


if __name__ == "__main__":
    sys.exit(main())
