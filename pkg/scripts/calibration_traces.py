"""Pilot emissions on the linear and WR90 5 m links: Gamma/c and N(t) traces."""
from _common import run_all

run_all([("emit", "calibration_linear.json", "calibration"),
         ("emit", "calibration_wr90.json", "calibration_wr90")])
