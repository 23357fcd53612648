#!/usr/bin/env python3
"""Run the acceptance suite and print one pass/fail line per criterion."""

import subprocess
import sys
from pathlib import Path

if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent
    raise SystemExit(
        subprocess.call(
            [sys.executable, "-m", "pytest", str(root / "tests" / "test_acceptance.py"),
             "-v", "-s", *sys.argv[1:]]
        )
    )
