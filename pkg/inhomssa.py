#!/usr/bin/env python
"""
inhomog-ssa command line - Main entry point
"""
import sys

from inhomssa.simulator.cli import main

if __name__ == "__main__":
    sys.exit(main())
