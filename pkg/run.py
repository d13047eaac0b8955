#!/usr/bin/env python3
"""
TabTokens Command Launcher

Run a TabTokens subcommand, e.g. `python run.py encode songs/ --out-dir tokens/`.
"""

import os
import sys

from dotenv import load_dotenv

# Add the project root to the Python path so `src` imports as a package
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# Load environment variables
load_dotenv()

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
