#!/usr/bin/env python3
"""
quake-modes: temporal association between earthquake failure modes.
Entry point for the command-line tool.

Stages:
    ingest     Parse and filter NDK catalogs
    features   Principal-axis features of every event
    classify   Fit the projection threshold and label events
    analyze    Presence vectors, permutation tests and FDR selection
    report     SVG figure panels
    synth      Synthetic catalog with known temporal coupling
"""

import sys


def main():
    """Main entry point."""
    try:
        from src.cli import main as cli_main
    except ImportError as e:
        print(f"Error importing analysis modules: {e}")
        print("\nMake sure you have installed the required dependencies:")
        print("  pip install -r requirements.txt")
        sys.exit(1)

    sys.exit(cli_main())


if __name__ == "__main__":
    main()
