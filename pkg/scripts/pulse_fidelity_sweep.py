"""Markov vs N-corrected emission over kappa on the linear flat-coupling link."""
from _common import run_all

run_all([("sweep", "pulse_sweep_linear.json", "pulse_fidelity")])
