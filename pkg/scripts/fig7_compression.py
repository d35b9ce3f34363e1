#!/usr/bin/env python3
"""Probability of accurate recovery against the pilot count M."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig7_compression.cfg", ("prob_accurate",))
