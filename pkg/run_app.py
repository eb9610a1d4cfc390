"""
Startup script for the segmentation pipeline CLI
Run this from the project root directory, e.g.

    python run_app.py gen-data --out runs/data --cases 40 --seed 0
"""

import sys
import os

# Add current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# Now import and run the CLI
from app.main import main

if __name__ == '__main__':
    sys.exit(main())
