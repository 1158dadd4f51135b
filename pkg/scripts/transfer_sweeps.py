"""Three transfer strategies over kappa on the 5 m and 60 m WR90 links.

Pass --workers N to spread kappa points over processes.
"""
import sys

from _common import run_all

extra = sys.argv[1:]
run_all([("sweep", "transfer_wr90_5m.json", "transfer_5m", *extra),
         ("sweep", "transfer_wr90_60m.json", "transfer_60m", *extra)])
