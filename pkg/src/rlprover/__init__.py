"""Reachability-logic prover for topmost rewrite theories."""

import sys

# deep structural recursion is the norm here (innermost rewriting, soup terms)
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

__version__ = "0.1.0"
