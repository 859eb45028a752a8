#!/usr/bin/env python3
"""
Convenience script to run the provisioning simulator.

Usage:
    python run_pipeline.py {solve,simulate,compare} --scenario FILE [options]

Examples:
    python run_pipeline.py solve --scenario data/sticky_three_rsu.json --out out
    python run_pipeline.py compare --scenario data/sticky_three_rsu.json --epochs 10000 --seeds 1,2,3
    python run_pipeline.py simulate --scenario data/sticky_three_rsu.json --policy all --workers 4
"""

import os
import subprocess
import sys

if __name__ == "__main__":
    # Forward every CLI arg to the pipeline runner and keep its exit code
    cmd = [sys.executable, os.path.join(os.path.dirname(os.path.abspath(__file__)), "pipeline", "run_analysis.py"), *sys.argv[1:]]
    sys.exit(subprocess.run(cmd).returncode)
