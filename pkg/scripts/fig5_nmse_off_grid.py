#!/usr/bin/env python3
"""NMSE and support accuracy against SNR when runs straddle block boundaries."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig5_nmse_off_grid.cfg", ("nmse_db", "support_accuracy"))
