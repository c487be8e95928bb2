"""Effect of the stabilization rho(k) = k^delta on the observed order (TPS2+AB).

    python3 scripts/rho_study.py [--set ref_steps=640] [--csv out.csv]
"""
from _common import study

if __name__ == "__main__":
    study("rho-study", __doc__)
