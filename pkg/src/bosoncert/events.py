"""Output events, input configurations and multiset combinatorics.

An output event of ``n`` particles over ``m`` modes is a multiset of mode
indices, stored canonically as a sorted tuple ``k`` (1-based). Bulk code works
on integer arrays of shape ``(count, n)`` holding the same sorted rows.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from collections import Counter
from dataclasses import dataclass
from math import comb, factorial, prod
from typing import Iterable, Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

DEFAULT_CAP = 2_000_000


class CapExceededError(RuntimeError):
    """The requested event space is larger than the caller's cap."""

    def __init__(self, count: int, cap: int, what: str = "events"):
        self.count = count
        self.cap = cap
        super().__init__(
            f"{count} {what} exceed the cap of {cap}; reduce n or m, or raise the cap"
        )


@dataclass(frozen=True, order=True)
class OccupationEvent:
    """A sorted tuple of 1-based output modes, one entry per particle."""

    modes: tuple[int, ...]

    def __post_init__(self) -> None:
        modes = tuple(int(k) for k in self.modes)
        if not modes:
            raise ValueError("an event needs at least one particle")
        if any(k < 1 for k in modes):
            raise ValueError(f"mode indices are 1-based, got {modes}")
        object.__setattr__(self, "modes", tuple(sorted(modes)))

    @classmethod
    def from_occupations(cls, occupations: dict[int, int]) -> "OccupationEvent":
        return cls(tuple(q for q, s in sorted(occupations.items()) for _ in range(s)))

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def occupations(self) -> dict[int, int]:
        """Sparse map mode -> particle count."""
        return dict(sorted(Counter(self.modes).items()))

    def check(self, m: int) -> None:
        if self.modes[-1] > m:
            raise ValueError(f"event {self.modes} has a mode outside 1..{m}")


@dataclass(frozen=True)
class InputConfig:
    """Occupied input modes and per-particle internal-state labels.

    Particles sharing a label are identical. ``overlap_coeffs`` optionally holds
    the lower-triangular Gram-Schmidt coefficients ``c[r, d]`` of each
    particle's internal state.
    """

    modes: tuple[int, ...]
    internal_labels: tuple[int, ...] | None = None
    overlap_coeffs: NDArray[np.complex128] | None = None
    m: int | None = None

    def __post_init__(self) -> None:
        modes = tuple(int(j) for j in self.modes)
        if not modes:
            raise ValueError("input needs at least one particle")
        if len(set(modes)) != len(modes):
            raise ValueError(f"input modes must be distinct, got {modes}")
        if min(modes) < 1 or (self.m is not None and max(modes) > self.m):
            raise ValueError(f"input modes {modes} out of range")
        object.__setattr__(self, "modes", modes)
        labels = self.internal_labels
        labels = (0,) * len(modes) if labels is None else tuple(labels)
        if len(labels) != len(modes):
            raise ValueError("one internal label per particle is required")
        object.__setattr__(self, "internal_labels", labels)
        if self.overlap_coeffs is not None:
            c = np.array(self.overlap_coeffs, dtype=np.complex128)
            if c.shape != (len(modes), len(modes)):
                raise ValueError("overlap_coeffs must be n x n")
            if not np.allclose(np.sum(np.abs(c) ** 2, axis=1), 1.0, atol=1e-10, rtol=0):
                raise ValueError("each row of overlap_coeffs must have unit norm")
            c.setflags(write=False)
            object.__setattr__(self, "overlap_coeffs", c)

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def indistinguishable(self) -> bool:
        return len(set(self.internal_labels)) == 1

    def rows(self) -> NDArray[np.intp]:
        """0-based row indices into a mode matrix."""
        return np.asarray(self.modes, dtype=np.intp) - 1


def count_events(n: int, m: int) -> int:
    """Number of multisets of size ``n`` over ``m`` modes, ``C(m+n-1, n)``."""
    return comb(m + n - 1, n)


def enumerate_events(n: int, m: int, cap: int = DEFAULT_CAP) -> Iterator[OccupationEvent]:
    """Yield every output event of ``n`` particles in ``m`` modes, lexicographically.

    Raises:
        CapExceededError: if ``C(m+n-1, n)`` exceeds ``cap``.
    """
    total = count_events(n, m)
    if total > cap:
        raise CapExceededError(total, cap)
    for k in itertools.combinations_with_replacement(range(1, m + 1), n):
        yield OccupationEvent(k)


def event_array(n: int, m: int, cap: int = DEFAULT_CAP) -> NDArray[np.int64]:
    """All events as a ``(C(m+n-1, n), n)`` array in lexicographic order."""
    total = count_events(n, m)
    if total > cap:
        raise CapExceededError(total, cap)
    flat = itertools.chain.from_iterable(
        itertools.combinations_with_replacement(range(1, m + 1), n)
    )
    return np.fromiter(flat, dtype=np.int64, count=total * n).reshape(total, n)


def rank_event(e: OccupationEvent | Sequence[int], m: int) -> int:
    """Lexicographic rank of an event among all multisets of its size over ``m`` modes."""
    k = e.modes if isinstance(e, OccupationEvent) else tuple(sorted(e))
    n = len(k)
    r = 0
    lo = 1
    for i, ki in enumerate(k):
        rest = n - i - 1
        for v in range(lo, ki):
            r += comb(m - v + rest, rest)
        lo = ki
    return r


def unrank_event(rank: int, n: int, m: int) -> OccupationEvent:
    """Inverse of :func:`rank_event`."""
    total = count_events(n, m)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, {total})")
    out = []
    lo = 1
    for i in range(n):
        rest = n - i - 1
        v = lo
        while True:
            block = comb(m - v + rest, rest)
            if rank < block:
                break
            rank -= block
            v += 1
        out.append(v)
        lo = v
    return OccupationEvent(tuple(out))


def unrank_events(ranks: NDArray[np.int64], n: int, m: int) -> NDArray[np.int64]:
    """Vectorised :func:`unrank_event` over an array of ranks."""
    ranks = np.array(ranks, dtype=np.int64)
    if count_events(n, m) >= 2**62:
        raise OverflowError("event space too large for int64 ranks")
    out = np.empty((ranks.size, n), dtype=np.int64)
    lo = np.ones(ranks.size, dtype=np.int64)
    for i in range(n):
        rest = n - i - 1
        # block[v] = number of events whose i-th entry is v, given entries before are fixed
        block = np.array([comb(m - v + rest, rest) for v in range(1, m + 1)], dtype=np.int64)
        cum = np.concatenate(([0], np.cumsum(block)))
        # ranks are relative to the first admissible value lo
        offset = ranks + cum[lo - 1]
        v = np.searchsorted(cum, offset, side="right")
        ranks = offset - cum[v - 1]
        out[:, i] = v
        lo = v
    return out


def multiplicity_factor(e: OccupationEvent) -> int:
    """``prod_q s_q!`` over the occupation numbers of ``e``."""
    return prod(factorial(s) for s in e.occupations.values())


def multiplicity_factors(events: NDArray[np.int64]) -> NDArray[np.float64]:
    """Row-wise ``prod_q s_q!`` for a sorted event array."""
    events = np.asarray(events)
    count, n = events.shape
    out = np.ones(count)
    run = np.ones(count)
    for c in range(1, n):
        same = events[:, c] == events[:, c - 1]
        run = np.where(same, run + 1, 1.0)
        out *= run
    return out


def is_collision_free(e: OccupationEvent) -> bool:
    return len(set(e.modes)) == len(e.modes)


def collision_free_mask(events: NDArray[np.int64]) -> NDArray[np.bool_]:
    events = np.asarray(events)
    return np.all(events[:, 1:] != events[:, :-1], axis=1)


def same_half(e: OccupationEvent, m: int) -> bool:
    """True if all particles leave in modes ``1..m/2`` or all in ``m/2+1..m``."""
    if m % 2:
        raise ValueError(f"same_half needs an even mode count, got {m}")
    h = m // 2
    return e.modes[-1] <= h or e.modes[0] > h


def same_half_mask(events: NDArray[np.int64], m: int) -> NDArray[np.bool_]:
    if m % 2:
        raise ValueError(f"same_half needs an even mode count, got {m}")
    events = np.asarray(events)
    h = m // 2
    return (events[:, -1] <= h) | (events[:, 0] > h)


def occupation_counts(events: NDArray[np.int64], m: int) -> NDArray[np.int64]:
    """Per-mode particle counts summed over all rows, length ``m``."""
    return np.bincount(np.asarray(events).ravel() - 1, minlength=m)


# -- file formats ------------------------------------------------------------


def write_events_jsonl(events: Iterable[Sequence[int]], fh) -> None:
    """One ``{"k": [...]}`` object per line."""
    for k in events:
        fh.write(json.dumps({"k": [int(x) for x in k]}))
        fh.write("\n")


def read_events_jsonl(fh) -> list[OccupationEvent]:
    """Parse a JSONL event stream.

    Raises:
        ValueError: naming the 1-based line number of the first malformed line.
    """
    out = []
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            k = json.loads(line)["k"]
            if not isinstance(k, list) or not all(isinstance(x, int) for x in k):
                raise TypeError("'k' must be a list of integers")
            out.append(OccupationEvent(tuple(k)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"malformed event on line {lineno}: {exc}") from exc
    return out


def summary_csv(
    events: NDArray[np.int64], probabilities: NDArray[np.float64], forbidden: NDArray[np.bool_]
) -> str:
    """CSV with columns ``event, probability, forbidden``; events as space-separated modes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["event", "probability", "forbidden"])
    for k, p, f in zip(events, probabilities, forbidden):
        writer.writerow([" ".join(str(int(x)) for x in k), repr(float(p)), str(bool(f)).lower()])
    return buf.getvalue()
