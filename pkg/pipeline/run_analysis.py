#!/usr/bin/env python3
"""Entry point for executing the provisioning simulator from the CLI."""

import os
import sys

# Add current directory to path to ensure imports work
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from provisioning_cli import main

if __name__ == "__main__":
    main()
