#!/usr/bin/env python3
"""
mfseg entry point: python mfseg.py <command> [options]
"""

import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
