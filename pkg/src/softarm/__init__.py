#!/usr/bin/env python3
"""
Soft Arm Toolkit - modeling and analysis of modular cable-driven soft arms
"""

__version__ = "0.1.0"

__all__ = []
