#!/usr/bin/env python3
"""Regenerate the frozen spacing-model calibration constants in theory.py.

Pools order-1 and order-2 spacing histograms over 500 spectra of dimension
500 per symmetry class and fits the constrained model. Prints the mu values
to paste into theory._DEFAULT_FIT_MU (gamma and chi follow from the area and
mean constraints).
"""

import time

import numpy as np

from specstats import rmt
from specstats.spectra import spacing_histogram

DIM = 500
COUNT = 500
SEED = 20240501


def main():
    for cls in ("GUE", "GSE"):
        t0 = time.perf_counter()
        spec = rmt.RandomMatrixSpec(cls, DIM, COUNT, seed=SEED)
        ens = rmt.spectrum_ensemble(spec)
        for order in (1, 2):
            pdf, _ = spacing_histogram(ens, order=order, bin_width=0.05,
                                       s_max=order + 4.0)
            fit = rmt.fit_spacing_model(pdf, order)
            print(f'    _DEFAULT_FIT_MU[("{cls}", {order})] = {fit.mu:.6g}'
                  f'  # residual {fit.residual:.4g}, raw {fit.raw_params}')
        print(f"  # {cls}: {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
