#!/usr/bin/env python3
"""Support recovery accuracy against SNR, on-grid supports."""
from _common import run_figure

if __name__ == "__main__":
    run_figure("fig3_support_accuracy.cfg", ("support_accuracy",))
