"""Matrix permanents and exact event probabilities.

For an event with occupation numbers ``s_q`` the transition matrix ``M`` takes
the rows of the occupied input modes and repeats the column of each output
mode ``q`` ``s_q`` times; probabilities are divided by ``prod_q s_q!``.
"""

from __future__ import annotations

import itertools
from math import factorial

import numpy as np
from numpy.typing import NDArray

from .events import InputConfig, OccupationEvent, count_events, multiplicity_factors
from .linalg import ModeUnitary

RYSER_MAX_N = 30
NAIVE_MAX_N = 8
_LOW_BITS = 12


def _gray_flips(bits: int) -> NDArray[np.intp]:
    """Column toggled at step ``k = 1 .. 2**bits - 1`` of the binary reflected Gray code."""
    k = np.arange(1, 2**bits, dtype=np.int64)
    return (np.log2(k & -k) + 0.5).astype(np.intp)


def _gray_subset_sums(a: NDArray, bits: int) -> tuple[NDArray, NDArray[np.int8]]:
    """Row sums of ``a[..., :bits]`` over all column subsets, in Gray-code order.

    Returns the sums with shape ``(2**bits, *a.shape[:-1])`` and the parity sign
    ``(-1)**|S|`` of each subset.
    """
    sums = np.zeros((2**bits,) + a.shape[:-1], dtype=a.dtype)
    sign = np.ones(2**bits, dtype=np.int8)
    member = np.zeros(bits, dtype=bool)
    for k, j in enumerate(_gray_flips(bits), start=1):
        member[j] = not member[j]
        if member[j]:
            sums[k] = sums[k - 1] + a[..., j]
        else:
            sums[k] = sums[k - 1] - a[..., j]
        sign[k] = -sign[k - 1]
    return sums, sign


def permanent_ryser(M) -> complex | float:
    """Permanent by Ryser's inclusion-exclusion formula.

    Column subsets are visited in Gray-code order so each step updates the row
    sums by a single column. The first (up to 12) columns are tabulated once and
    combined with a Gray-code walk over the remaining columns.

    Args:
        M: Square matrix of size ``n <= 30``.

    Returns:
        ``perm(M)``, with the dtype kind of ``M`` (real or complex).
    """
    a = np.asarray(M)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n > RYSER_MAX_N:
        raise ValueError(f"n = {n} exceeds the Ryser size cap of {RYSER_MAX_N}")
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    a = a.astype(dtype)

    low = min(n, _LOW_BITS)
    low_sums, low_sign = _gray_subset_sums(a, low)  # (2**low, n)
    total = np.sum(low_sign * np.prod(low_sums, axis=1))
    high = n - low
    if high:
        hs = np.zeros(n, dtype=dtype)
        hsign = 1
        member = np.zeros(high, dtype=bool)
        for j in _gray_flips(high):
            member[j] = not member[j]
            col = a[:, low + j]
            hs = hs + col if member[j] else hs - col
            hsign = -hsign
            total += hsign * np.sum(low_sign * np.prod(low_sums + hs, axis=1))
    result = (-1) ** n * total
    return complex(result) if dtype == np.complex128 else float(result)


def permanents(Ms) -> NDArray:
    """Gray-code Ryser permanents of a stack of matrices with shape ``(B, n, n)``."""
    a = np.asarray(Ms)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise ValueError(f"expected a (B, n, n) stack, got shape {a.shape}")
    n = a.shape[1]
    if n > RYSER_MAX_N:
        raise ValueError(f"n = {n} exceeds the Ryser size cap of {RYSER_MAX_N}")
    if n == 0:
        return np.ones(a.shape[0], dtype=a.dtype)
    rs = np.zeros(a.shape[:2], dtype=a.dtype)  # (B, n) row sums of current subset
    total = np.zeros(a.shape[0], dtype=a.dtype)
    member = np.zeros(n, dtype=bool)
    sign = 1
    for j in _gray_flips(n):
        member[j] = not member[j]
        if member[j]:
            rs += a[:, :, j]
        else:
            rs -= a[:, :, j]
        sign = -sign
        total += sign * np.prod(rs, axis=1)
    return (-1) ** n * total


def permanent_naive(M) -> complex | float:
    """Permanent as the sum over all ``n!`` permutation products (``n <= 8``)."""
    a = np.asarray(M)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise ValueError(f"n = {n} exceeds the naive permanent cap of {NAIVE_MAX_N}")
    if n == 0:
        return 1.0
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    total = np.prod(a[np.arange(n), perms], axis=1).sum()
    return complex(total) if np.iscomplexobj(a) else float(total)


# -- transition matrices and probabilities -----------------------------------


def _as_event_array(events) -> NDArray[np.int64]:
    if isinstance(events, OccupationEvent):
        return np.asarray([events.modes], dtype=np.int64)
    arr = np.asarray(events, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return np.sort(arr, axis=1)


def submatrices(u: ModeUnitary | NDArray, rows, events) -> NDArray[np.complex128]:
    """Stack of transition matrices ``M[b, l, c] = U[j_l, k_{b,c}]``, shape ``(B, n, n)``."""
    entries = u.entries if isinstance(u, ModeUnitary) else np.asarray(u)
    ev = _as_event_array(events)
    rows = np.asarray(rows, dtype=np.intp)
    if ev.shape[1] != rows.size:
        raise ValueError(
            f"particle count mismatch: input has {rows.size}, events have {ev.shape[1]}"
        )
    if ev.size and (ev.min() < 1 or ev.max() > entries.shape[1]):
        raise ValueError("event mode index outside 1..m")
    sub = entries[rows][:, ev - 1]  # (n, B, n)
    return np.ascontiguousarray(np.moveaxis(sub, 1, 0))


def _check_input(u, inp: InputConfig) -> None:
    m = u.m if isinstance(u, ModeUnitary) else np.asarray(u).shape[0]
    if max(inp.modes) > m:
        raise ValueError(f"input modes {inp.modes} exceed m = {m}")


def boson_probabilities(u: ModeUnitary, inp: InputConfig, events) -> NDArray[np.float64]:
    """``|perm M|^2 / prod_q s_q!`` for indistinguishable bosons, one value per event."""
    if not inp.indistinguishable:
        raise ValueError("boson probabilities need identical internal labels")
    _check_input(u, inp)
    ev = _as_event_array(events)
    perms = permanents(submatrices(u, inp.rows(), ev))
    return np.abs(perms) ** 2 / multiplicity_factors(ev)


def classical_probabilities(u: ModeUnitary, inp: InputConfig, events) -> NDArray[np.float64]:
    """Exact distribution of independently routed, distinguishable particles."""
    _check_input(u, inp)
    ev = _as_event_array(events)
    weights = np.abs(submatrices(u, inp.rows(), ev)) ** 2
    return permanents(weights) / multiplicity_factors(ev)


def misaligned_probabilities(
    u: ModeUnitary, inp: InputConfig, bad: int, events
) -> NDArray[np.float64]:
    """One distinguishable particle among otherwise identical bosons.

    The distinguishable particle (1-based index ``bad``) lands in mode ``q`` with
    probability ``|U[j_bad, q]|^2``; the other ``n - 1`` bosons interfere
    among themselves and fill the rest of the event.
    """
    n = inp.n
    if n < 2:
        raise ValueError("misaligned model needs n >= 2")
    if not 1 <= bad <= n:
        raise ValueError(f"bad particle index {bad} outside 1..{n}")
    _check_input(u, inp)
    entries = u.entries if isinstance(u, ModeUnitary) else np.asarray(u)
    ev = _as_event_array(events)
    if ev.shape[1] != n:
        raise ValueError(f"particle count mismatch: input has {n}, events have {ev.shape[1]}")
    rest = InputConfig(tuple(j for i, j in enumerate(inp.modes, start=1) if i != bad))
    weight_row = np.abs(entries[inp.modes[bad - 1] - 1]) ** 2
    out = np.zeros(ev.shape[0])
    for c in range(n):
        # visit each occupied mode once, at its first column
        first = np.ones(ev.shape[0], dtype=bool) if c == 0 else ev[:, c] != ev[:, c - 1]
        if not first.any():
            continue
        sel = ev[first]
        reduced = np.delete(sel, c, axis=1)
        out[first] += weight_row[sel[:, c] - 1] * boson_probabilities(u, rest, reduced)
    return out


def uniform_probabilities(n: int, m: int, events) -> NDArray[np.float64]:
    ev = _as_event_array(events)
    return np.full(ev.shape[0], 1.0 / count_events(n, m))


def boson_probability(u: ModeUnitary, inp: InputConfig, e: OccupationEvent) -> float:
    return float(boson_probabilities(u, inp, e)[0])


def classical_probability(u: ModeUnitary, inp: InputConfig, e: OccupationEvent) -> float:
    return float(classical_probabilities(u, inp, e)[0])


def misaligned_probability(
    u: ModeUnitary, inp: InputConfig, bad: int, e: OccupationEvent
) -> float:
    return float(misaligned_probabilities(u, inp, bad, e)[0])


MODELS = ("uniform", "classical", "boson", "misaligned")


def model_probabilities(
    model: str, u: ModeUnitary, inp: InputConfig, events, bad: int | None = None
) -> NDArray[np.float64]:
    """Dispatch to the exact per-event probability of a named model."""
    if model == "boson":
        return boson_probabilities(u, inp, events)
    if model == "classical":
        return classical_probabilities(u, inp, events)
    if model == "misaligned":
        return misaligned_probabilities(u, inp, inp.n if bad is None else bad, events)
    if model == "uniform":
        return uniform_probabilities(inp.n, u.m, events)
    raise ValueError(f"no exact probability for model {model!r}; choose from {MODELS}")


def naive_boson_probability(u: ModeUnitary, inp: InputConfig, e: OccupationEvent) -> float:
    """Slow reference: naive permanent of the column-repeated matrix."""
    m = submatrices(u, inp.rows(), e)[0]
    f = 1
    for s in e.occupations.values():
        f *= factorial(s)
    return abs(permanent_naive(m)) ** 2 / f
