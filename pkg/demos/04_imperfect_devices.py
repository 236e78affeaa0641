"""Error budget for a real interferometer.

Partly distinguishable photons and an imprecisely fabricated matrix both let
forbidden events through. The first is bounded from the overlaps of the
photons' internal states; the second is estimated from the mean deviation of
the matrix entries and checked here against a Monte-Carlo ensemble.
"""

import warnings

import numpy as np

from bosoncert import (
    distinguishability_coeffs,
    expected_violation_exact,
    make_cyclic_input,
    make_fourier,
    v_dev_estimate,
    v_dev_numeric,
    violation_bound_partial,
)
from bosoncert.certify import v_total

n = 3
u, inp = make_fourier(n * n), make_cyclic_input(n)

# Photon 3 overlaps photons 1 and 2 with amplitude 0.95.
overlap = np.array([[1, 1, 0.95], [1, 1, 0.95], [0.95, 0.95, 1]])
c = distinguishability_coeffs(overlap)
v_partial = violation_bound_partial(c)
print(f"partial distinguishability bound: {v_partial:.4f}")
print(f"fully distinguishable photon 3, exact: {expected_violation_exact('misaligned', u, inp):.4f}")

# Matrix deviations: first-order estimate against 100 perturbed matrices.
for d in (0.01, 0.03, 0.1, 0.4):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = v_dev_estimate(n, n * n, d).closed_form
    num = v_dev_numeric(u, inp, d, draws=100, seed=4)
    print(f"|delta| = {d:<5} estimate {est:.2e}  numeric {num.mean:.2e} +- {num.std:.1e}")

print(f"combined budget at |delta| = 0.01: {v_total(v_partial, v_dev_estimate(n, n * n, 0.01).closed_form):.4f}")
