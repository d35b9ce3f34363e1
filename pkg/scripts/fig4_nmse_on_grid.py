#!/usr/bin/env python3
"""NMSE against SNR for every estimator, on-grid supports."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig4_nmse_on_grid.cfg", ("nmse_db",))
