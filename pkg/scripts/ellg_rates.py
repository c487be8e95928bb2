"""Temporal convergence of the four eddy-current coupling schedules.

The default reference run alone takes several minutes on one core; pass
e.g. --set ref_steps=7168 for a quicker, coarser study.

    python3 scripts/ellg_rates.py [--set ref_steps=7168] [--threads 4] [--csv out.csv]
"""
from _common import study

if __name__ == "__main__":
    study("ellg-rates", __doc__)
