#!/usr/bin/env python3
"""NMSE against the amplitude ratio C of the out-of-band channel."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig8_perturbation.cfg", ("nmse_db",))
