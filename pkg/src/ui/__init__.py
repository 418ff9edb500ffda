"""
User Interface Module
Contains the command-line front end.

Usage:
    python main.py regress --experiment legendre-recovery --trials 1
    python main.py check
"""

from .cli import CLI

__all__ = ["CLI"]
