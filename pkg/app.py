"""
Half-Wave Maps Soliton Lab
Main Application Entry Point

Usage: python app.py <validate|integrate|probe|sweep|field-scan|energy-check> ...
"""

import sys
from pathlib import Path

# Add the repository root to path so the src package resolves
sys.path.insert(0, str(Path(__file__).parent))

from src.cli import main

if __name__ == '__main__':
    sys.exit(main())
