"""Temporal convergence of the LLG integrators against a fine TPS2 reference.

    python3 scripts/llg_rates.py [--set ref_steps=640] [--threads 4] [--csv out.csv]
"""
from _common import study

if __name__ == "__main__":
    study("llg-rates", __doc__)
