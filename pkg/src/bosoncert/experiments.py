"""Data tables behind the bunching, clouding, violation and perturbation figures.

Each function returns rows in the shared ``model,n,m,param,quantity,value,stderr``
schema (see :func:`bosoncert.certify.format_csv`). All randomness is derived from
the ``seed`` argument, so equal arguments give identical tables.
"""

from __future__ import annotations

import math
import warnings
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .certify import (
    classical_violation,
    count_forbidden,
    expected_violation_exact,
    forbidden_mass_sampled,
    meanfield_violation,
    meanfield_witnesses,
    v_dev_estimate,
    v_dev_numeric,
    witnesses,
)
from .events import DEFAULT_CAP, InputConfig, count_events
from .linalg import make_cyclic_input, make_fourier, make_haar_random, make_walk_matrix

FIGURES = ("fig2a", "fig2b", "fig3", "fig4")


def _seeds(seed: int, purpose: str, count: int) -> list[int]:
    return [int(s) for s in rngmod.stream(seed, purpose).integers(0, 2**63 - 1, size=count)]


def centered_input(n: int, m: int) -> InputConfig:
    """``n`` adjacent input modes placed in the middle of ``m`` modes."""
    if n > m:
        raise ValueError(f"cannot place {n} particles in {m} modes")
    start = (m - n) // 2 + 1
    return InputConfig(tuple(range(start, start + n)), m=m)


def _summary(values: Sequence[float]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std / math.sqrt(arr.size), std


def fig2a(ns: Sequence[int] = (3, 4), ensemble: int = 100, draws: int = 10_000, seed: int = 0,
          cap: int = DEFAULT_CAP) -> list[tuple]:
    """Collision-free probability P1 over Haar-random matrices with ``m = n**2``.

    Boson and classical values are exact per matrix; the mean-field value is
    averaged over ``draws`` phase settings per matrix. ``P1`` rows carry the
    ensemble mean and its standard error, ``P1_spread`` rows the ensemble
    standard deviation.
    """
    rows = []
    for n in ns:
        m = n * n
        inp = InputConfig(tuple(range(1, n + 1)))
        per_model: dict[str, list[float]] = {"classical": [], "meanfield": [], "boson": []}
        for s in _seeds(seed, f"fig2a-{n}", ensemble):
            u = make_haar_random(m, s)
            per_model["classical"].append(witnesses("classical", u, inp, cap=cap).p1)
            per_model["boson"].append(witnesses("boson", u, inp, cap=cap).p1)
            per_model["meanfield"].append(meanfield_witnesses(u, inp, draws, s).p1)
        for model, vals in per_model.items():
            mean, se, std = _summary(vals)
            rows.append((model, n, m, "", "P1", mean, se))
            rows.append((model, n, m, "", "P1_spread", std, ""))
    return rows


def fig2b(ns: Sequence[int] = (3, 4), m: int = 8, steps: int = 8, draws: int = 10_000,
          seed: int = 0, cap: int = DEFAULT_CAP) -> list[tuple]:
    """Clouding C on the brick-wall walk with ``n`` adjacent, centred inputs."""
    u = make_walk_matrix(m, steps)
    rows = []
    for n in ns:
        inp = centered_input(n, m)
        for model in ("classical", "meanfield", "boson"):
            if model == "meanfield":
                w = meanfield_witnesses(u, inp, draws, _seeds(seed, f"fig2b-{n}", 1)[0], clouding=True)
            else:
                w = witnesses(model, u, inp, cap=cap, clouding=True)
            rows.append((model, n, m, steps, "C", w.clouding, w.clouding_stderr))
    return rows


def fig3(ns: Sequence[int] = (2, 3, 4, 5), draws: int = 10_000, seed: int = 0,
         cap: int = DEFAULT_CAP, sample_size: int = 10_000) -> list[tuple]:
    """Suppression-law violation on the Fourier matrix with cyclic input, ``m = n**2``.

    Boson, classical and misaligned values are exact when the event space fits
    in ``cap``; beyond it the misaligned value is extrapolated from
    ``sample_size`` random forbidden events and the classical value comes from
    the residue transform. Mean-field values average ``draws`` phase settings.
    """
    rows = []
    for n in ns:
        m = n * n
        u, inp = make_fourier(m), make_cyclic_input(n)
        enumerable = count_events(n, m) <= cap
        mf = meanfield_violation(u, inp, draws, _seeds(seed, f"fig3-{n}", 1)[0])
        rows.append(("classical", n, m, "", "V", expected_violation_exact("classical", u, inp, cap)
                     if enumerable else classical_violation(u, inp), 0.0))
        rows.append(("meanfield", n, m, "", "V", mf.value, mf.stderr))
        if enumerable:
            rows.append(("misaligned", n, m, "", "V",
                         expected_violation_exact("misaligned", u, inp, cap), 0.0))
            rows.append(("boson", n, m, "", "V", expected_violation_exact("boson", u, inp, cap), 0.0))
        else:
            est = forbidden_mass_sampled("misaligned", u, inp, min(sample_size, count_forbidden(n, m)),
                                         _seeds(seed, f"fig3-mis-{n}", 1)[0])
            rows.append(("misaligned", n, m, "", "V", est.value, est.stderr))
        rows.append(("reference", n, m, "", "V", (n - 1) / n, ""))
    return rows


def fig4(n: int = 3, avg_devs: Sequence[float] = (0.005, 0.01, 0.02, 0.03, 0.05, 0.1),
         draws: int = 400, sample_size: int = 200, seed: int = 0) -> list[tuple]:
    """Violation of perturbed Fourier matrices against the first-order estimate."""
    m = n * n
    u, inp = make_fourier(m), make_cyclic_input(n)
    rows = []
    for i, d in enumerate(avg_devs):
        num = v_dev_numeric(u, inp, d, draws, sample_size, _seeds(seed, f"fig4-{n}", len(avg_devs))[i])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = v_dev_estimate(n, m, d)
        rows.append(("perturbed", n, m, d, "V_numeric", num.mean, num.stderr))
        rows.append(("perturbed", n, m, d, "V_numeric_spread", num.std, ""))
        rows.append(("estimate", n, m, d, "V_estimate", est.closed_form, ""))
        rows.append(("estimate", n, m, d, "V_estimate_general", est.general, ""))
    return rows
