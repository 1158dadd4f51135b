"""Largest correctable distortion: feasibility scan against the closed form."""
from _common import run_all

run_all([("dmax", "dmax_scan.json", "dmax")])
