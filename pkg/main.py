#!/usr/bin/env python3
import sys
from src.cli.runner import main as run_cli

def main(argv=None):
    """Main entry point for the toolkit"""
    return run_cli(argv)

if __name__ == "__main__":
    sys.exit(main())
