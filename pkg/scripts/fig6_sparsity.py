#!/usr/bin/env python3
"""Probability of accurate recovery as the number of nonzero blocks grows."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig6_sparsity.cfg", ("prob_accurate",))
