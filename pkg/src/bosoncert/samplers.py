"""Seeded event generators for the uniform, classical, mean-field, boson and
misaligned models.

Every sampler is a pure function of its arguments and ``seed``; shots are drawn
in fixed-size blocks from counter-based streams (see :mod:`bosoncert.rng`), so
``workers`` only changes speed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .events import (
    DEFAULT_CAP,
    InputConfig,
    OccupationEvent,
    count_events,
    event_array,
    read_events_jsonl,
    unrank_events,
    write_events_jsonl,
)
from .linalg import ModeUnitary
from .permanent import model_probabilities

SAMPLER_MODELS = ("uniform", "classical", "meanfield", "boson", "misaligned")


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """A reproducible stream of output events from one model.

    ``events`` is an ``(shots, n)`` integer array of sorted 1-based modes.
    """

    model: str
    events: NDArray[np.int64]
    seed: int
    n: int
    m: int
    matrix_label: str | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ev = np.array(self.events, dtype=np.int64).reshape(-1, self.n)
        ev.sort(axis=1)
        if ev.size and (ev.min() < 1 or ev.max() > self.m):
            raise ValueError(f"batch contains modes outside 1..{self.m}")
        ev.setflags(write=False)
        object.__setattr__(self, "events", ev)

    @property
    def shots(self) -> int:
        return self.events.shape[0]

    def __len__(self) -> int:
        return self.shots

    def __iter__(self) -> Iterator[OccupationEvent]:
        for row in self.events:
            yield OccupationEvent(tuple(row))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleBatch):
            return NotImplemented
        return self.header() == other.header() and np.array_equal(self.events, other.events)

    __hash__ = None  # type: ignore[assignment]

    def header(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "shots": self.shots,
            "matrix": self.matrix_label,
            "params": self.params,
        }

    def frequencies(self) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Distinct events (lexicographic) and how often each occurred."""
        return np.unique(self.events, axis=0, return_counts=True)

    def frequency_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["event", "count", "frequency"])
        uniq, counts = self.frequencies()
        for k, c in zip(uniq, counts):
            writer.writerow([" ".join(map(str, k)), int(c), repr(c / self.shots)])
        return buf.getvalue()

    def save(self, path, extra_header: dict[str, Any] | None = None) -> None:
        """Write ``path`` as JSONL and ``path.header.json`` as the sidecar header."""
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            write_events_jsonl(self.events.tolist(), fh)
        header = self.header() | (extra_header or {})
        header_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, n: int | None = None, m: int | None = None) -> "SampleBatch":
        """Read a JSONL batch; header fields fill in ``n``, ``m``, model and seed if present."""
        path = Path(path)
        hp = header_path(path)
        header = json.loads(hp.read_text()) if hp.exists() else {}
        with open(path, encoding="utf-8") as fh:
            events = read_events_jsonl(fh)
        if not events:
            raise ValueError(f"{path} contains no events")
        sizes = {e.n for e in events}
        if len(sizes) != 1:
            raise ValueError(f"{path} mixes events with particle counts {sorted(sizes)}")
        n = n or header.get("n") or sizes.pop()
        m = m or header.get("m") or max(e.modes[-1] for e in events)
        return cls(
            model=header.get("model", "unknown"),
            events=np.array([e.modes for e in events], dtype=np.int64),
            seed=header.get("seed", -1),
            n=n,
            m=m,
            matrix_label=header.get("matrix"),
            params=header.get("params", {}),
        )


def header_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".header.json")


# -- helpers -----------------------------------------------------------------


def _draw_rows(cdf: NDArray[np.float64], u: NDArray[np.float64]) -> NDArray[np.int64]:
    """Inverse-CDF draw per row: ``cdf`` is ``(S, m)``, ``u`` is ``(S, k)``; returns 1-based modes."""
    scaled = u * cdf[:, -1:]
    idx = np.empty(u.shape, dtype=np.int64)
    for c in range(u.shape[1]):
        idx[:, c] = (cdf <= scaled[:, c : c + 1]).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1) + 1


def _check_rows(u: ModeUnitary, inp: InputConfig) -> NDArray[np.complex128]:
    if max(inp.modes) > u.m:
        raise ValueError(f"input modes {inp.modes} exceed m = {u.m}")
    rows = u.entries[inp.rows()]
    norms = np.sum(np.abs(rows) ** 2, axis=1)
    if u.label != "perturbed" and not np.allclose(norms, 1.0, atol=1e-10, rtol=0):
        raise ValueError(f"input rows of U are not normalised: {norms}")
    return rows


def _stack(parts: list[NDArray[np.int64]], n: int) -> NDArray[np.int64]:
    out = np.concatenate(parts) if parts else np.empty((0, n), dtype=np.int64)
    out.sort(axis=1)
    return out


def _check_shots(shots: int) -> None:
    if shots < 1:
        raise ValueError("shots must be >= 1")


# -- samplers ----------------------------------------------------------------


def sample_uniform(n: int, m: int, shots: int, seed: int, workers: int = 1) -> SampleBatch:
    """Every multiset of ``n`` modes out of ``m`` with equal probability."""
    _check_shots(shots)
    total = count_events(n, m)

    def block(gen: np.random.Generator, size: int) -> NDArray[np.int64]:
        return unrank_events(gen.integers(0, total, size=size), n, m)

    parts = rngmod.map_blocks(block, shots, seed, "uniform", workers)
    return SampleBatch("uniform", _stack(parts, n), seed, n, m)


def sample_classical(
    u: ModeUnitary, inp: InputConfig, shots: int, seed: int, workers: int = 1
) -> SampleBatch:
    """Distinguishable particles, each routed independently with ``|U[j, k]|^2``."""
    _check_shots(shots)
    rows = _check_rows(u, inp)
    cdf = np.cumsum(np.abs(rows) ** 2, axis=1)  # (n, m)

    def block(gen: np.random.Generator, size: int) -> NDArray[np.int64]:
        draws = gen.random((size, inp.n))
        out = np.empty((size, inp.n), dtype=np.int64)
        for l in range(inp.n):
            idx = np.searchsorted(cdf[l], draws[:, l] * cdf[l, -1], side="right")
            out[:, l] = np.minimum(idx, u.m - 1) + 1
        return out

    parts = rngmod.map_blocks(block, shots, seed, "classical", workers)
    return SampleBatch("classical", _stack(parts, inp.n), seed, inp.n, u.m, u.label)


def meanfield_distribution(
    rows: NDArray[np.complex128], phases: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Single-particle distribution ``|sum_r e^{i theta_r} U[j_r, q]|^2 / n`` per phase setting.

    Args:
        rows: ``(n, m)`` rows of the occupied input modes.
        phases: ``(S, n)`` phase settings.

    Returns:
        ``(S, m)`` array of mode probabilities.
    """
    amp = np.exp(1j * phases) @ rows
    return np.abs(amp) ** 2 / rows.shape[0]


def sample_meanfield(
    u: ModeUnitary,
    inp: InputConfig,
    shots: int,
    seed: int,
    freeze_phases: bool = False,
    workers: int = 1,
    check: bool = False,
) -> SampleBatch:
    """Random-phase mean-field sampler.

    Each shot draws phases ``theta_r`` uniformly from ``[0, 2 pi)``, builds the
    single-particle distribution of :func:`meanfield_distribution`, and drops all
    ``n`` particles into it independently. With ``freeze_phases`` one phase
    setting, drawn from the seed, is shared by every shot.

    Args:
        check: Verify that each shot's distribution sums to one within 1e-10.
    """
    _check_shots(shots)
    rows = _check_rows(u, inp)
    n = inp.n
    frozen = None
    if freeze_phases:
        theta = rngmod.stream(seed, "meanfield-frozen").random((1, n)) * 2 * np.pi
        frozen = np.cumsum(meanfield_distribution(rows, theta), axis=1)

    def block(gen: np.random.Generator, size: int) -> NDArray[np.int64]:
        theta = gen.random((size, n)) * 2 * np.pi
        draws = gen.random((size, n))
        if frozen is not None:
            cdf = np.broadcast_to(frozen, (size, u.m))
        else:
            p = meanfield_distribution(rows, theta)
            if check and not np.allclose(p.sum(axis=1), 1.0, atol=1e-10, rtol=0):
                raise AssertionError("mean-field distribution is not normalised")
            cdf = np.cumsum(p, axis=1)
        return _draw_rows(cdf, draws)

    parts = rngmod.map_blocks(block, shots, seed, "meanfield", workers)
    params = {"freeze_phases": True} if freeze_phases else {}
    return SampleBatch("meanfield", _stack(parts, n), seed, n, u.m, u.label, params)


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Exact event probabilities with their cumulative table, built once per setup."""

    events: NDArray[np.int64]
    probabilities: NDArray[np.float64]
    cdf: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cdf", np.cumsum(self.probabilities))

    def draw(self, gen: np.random.Generator, size: int) -> NDArray[np.int64]:
        x = gen.random(size) * self.cdf[-1]
        idx = np.searchsorted(self.cdf, x, side="right")
        return self.events[np.minimum(idx, len(self.events) - 1)]


def probability_table(
    model: str,
    u: ModeUnitary,
    inp: InputConfig,
    cap: int = DEFAULT_CAP,
    bad: int | None = None,
) -> ProbabilityTable:
    """Enumerate the event space once and tabulate a model's exact probabilities."""
    events = event_array(inp.n, u.m, cap)
    return ProbabilityTable(events, model_probabilities(model, u, inp, events, bad))


def _sample_table(
    model: str, table: ProbabilityTable, u: ModeUnitary, n: int, shots: int, seed: int,
    workers: int, params: dict[str, Any],
) -> SampleBatch:
    parts = rngmod.map_blocks(table.draw, shots, seed, model, workers)
    return SampleBatch(model, _stack(parts, n), seed, n, u.m, u.label, params)


def sample_boson(
    u: ModeUnitary,
    inp: InputConfig,
    shots: int,
    seed: int,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> SampleBatch:
    """Exact boson sampling by inverse-CDF over the enumerated event space.

    Raises:
        CapExceededError: if ``C(m+n-1, n) > cap``.
    """
    _check_shots(shots)
    table = probability_table("boson", u, inp, cap)
    return _sample_table("boson", table, u, inp.n, shots, seed, workers, {})


def sample_misaligned(
    u: ModeUnitary,
    inp: InputConfig,
    bad: int,
    shots: int,
    seed: int,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> SampleBatch:
    """As :func:`sample_boson`, with particle ``bad`` (1-based) distinguishable."""
    _check_shots(shots)
    table = probability_table("misaligned", u, inp, cap, bad=bad)
    return _sample_table("misaligned", table, u, inp.n, shots, seed, workers, {"bad": bad})


def sample(
    model: str,
    u: ModeUnitary | None,
    inp: InputConfig | None,
    shots: int,
    seed: int,
    *,
    n: int | None = None,
    m: int | None = None,
    cap: int = DEFAULT_CAP,
    bad: int | None = None,
    freeze_phases: bool = False,
    workers: int = 1,
) -> SampleBatch:
    """Dispatch on the model name."""
    if model == "uniform":
        n = n if n is not None else inp.n
        m = m if m is not None else u.m
        return sample_uniform(n, m, shots, seed, workers)
    if u is None or inp is None:
        raise ValueError(f"model {model!r} needs a matrix and an input configuration")
    if model == "classical":
        return sample_classical(u, inp, shots, seed, workers)
    if model == "meanfield":
        return sample_meanfield(u, inp, shots, seed, freeze_phases, workers)
    if model == "boson":
        return sample_boson(u, inp, shots, seed, cap, workers)
    if model == "misaligned":
        return sample_misaligned(u, inp, inp.n if bad is None else bad, shots, seed, cap, workers)
    raise ValueError(f"unknown model {model!r}; choose from {SAMPLER_MODELS}")
