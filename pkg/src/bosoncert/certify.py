"""Suppression-law certification, coarse-grained witnesses and error budgets.

For the Fourier matrix with the cyclic input, an event ``k`` is forbidden when
``sum(k) mod n != 0``. The violation of a stream is the fraction of its events
that are forbidden.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass
from math import comb, factorial
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from . import rng as rngmod
from .events import (
    DEFAULT_CAP,
    CapExceededError,
    InputConfig,
    OccupationEvent,
    collision_free_mask,
    count_events,
    event_array,
    same_half_mask,
    unrank_events,
)
from .linalg import ModeUnitary, perturb
from .permanent import boson_probabilities, model_probabilities
from .samplers import SampleBatch, meanfield_distribution

ProbabilityFn = Callable[[ModeUnitary, InputConfig, NDArray[np.int64]], NDArray[np.float64]]
ModelSpec = Union[str, ProbabilityFn]

CSV_COLUMNS = ("model", "n", "m", "param", "quantity", "value", "stderr")


class Estimate(NamedTuple):
    value: float
    stderr: float


# -- suppression law ---------------------------------------------------------


def is_forbidden(e: OccupationEvent | Sequence[int], n: int | None = None) -> bool:
    """True if the mode sum of ``e`` is not divisible by the particle number."""
    modes = e.modes if isinstance(e, OccupationEvent) else e
    n = len(modes) if n is None else n
    return sum(modes) % n != 0


def forbidden_mask(events: NDArray[np.int64], n: int | None = None) -> NDArray[np.bool_]:
    events = np.asarray(events, dtype=np.int64)
    n = events.shape[1] if n is None else n
    return events.sum(axis=1) % n != 0


def residue_counts(n: int, m: int) -> list[int]:
    """Number of events of ``n`` particles in ``m`` modes for each value of ``sum(k) mod n``.

    Modes are grouped by residue class, so the cost is independent of ``m``.
    """
    per_class = [len(range(r if r else n, m + 1, n)) for r in range(n)]
    # ways[size][res]
    ways = [[0] * n for _ in range(n + 1)]
    ways[0][0] = 1
    for r, c in enumerate(per_class):
        new = [[0] * n for _ in range(n + 1)]
        for size in range(n + 1):
            for res in range(n):
                w = ways[size][res]
                if not w:
                    continue
                for t in range(n - size + 1 if c else 1):
                    new[size + t][(res + r * t) % n] += w * comb(c + t - 1, t)
        ways = new
    return ways[n]


def count_forbidden(n: int, m: int) -> int:
    return count_events(n, m) - residue_counts(n, m)[0]


def random_forbidden_events(
    n: int, m: int, size: int, gen: np.random.Generator
) -> NDArray[np.int64]:
    """``size`` distinct forbidden events, uniformly at random, by rejection from uniform ranks."""
    total = count_forbidden(n, m)
    if size > total:
        raise ValueError(f"only {total} forbidden events exist, asked for {size}")
    chosen: dict[tuple[int, ...], None] = {}
    while len(chosen) < size:
        batch = unrank_events(gen.integers(0, count_events(n, m), size=4 * size), n, m)
        for row in batch[forbidden_mask(batch, n)]:
            chosen.setdefault(tuple(row), None)
            if len(chosen) == size:
                break
    return np.array(list(chosen), dtype=np.int64)


# -- violation reports -------------------------------------------------------


@dataclass(frozen=True)
class ViolationReport:
    n_forbidden: int
    n_runs: int
    n: int
    model: str = "unknown"

    @property
    def violation(self) -> float:
        return self.n_forbidden / self.n_runs

    @property
    def false_accept_prob(self) -> float | None:
        """``n**-R``: chance that ``R`` structureless events all pass, reported only for clean runs."""
        return float(self.n) ** -self.n_runs if self.n_forbidden == 0 else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violation"] = self.violation
        d["false_accept_prob"] = self.false_accept_prob
        if self.n_forbidden == 0:
            # n**-R underflows for long clean runs
            d["log10_false_accept_prob"] = -self.n_runs * math.log10(self.n)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self, m: int | str = "") -> list[tuple]:
        stderr = math.sqrt(self.violation * (1 - self.violation) / self.n_runs)
        rows = [(self.model, self.n, m, "", "V", self.violation, stderr)]
        if self.false_accept_prob is not None:
            rows.append((self.model, self.n, m, "", "false_accept_prob", self.false_accept_prob, ""))
        return rows


def violation(batch: SampleBatch | Iterable[OccupationEvent], n: int | None = None) -> ViolationReport:
    """Count forbidden events in a batch.

    Raises:
        ValueError: for an empty batch.
    """
    if isinstance(batch, SampleBatch):
        events, model = batch.events, batch.model
        n = batch.n if n is None else n
    else:
        rows = [e.modes if isinstance(e, OccupationEvent) else tuple(e) for e in batch]
        events, model = np.array(rows, dtype=np.int64), "unknown"
        if events.size:
            n = events.shape[1] if n is None else n
    if len(events) == 0:
        raise ValueError("cannot certify an empty batch")
    bad = int(forbidden_mask(events, n).sum())
    return ViolationReport(bad, len(events), n, model)


def required_runs(n: int, alpha: float) -> int:
    """Smallest ``R`` with ``n**-R <= alpha``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    r = 0
    # relative slack absorbs the binary representation of alpha (1e-6 is stored below 10**-6)
    while float(n) ** -r > alpha * (1 + 1e-12):
        r += 1
    return r


# -- exact violation ---------------------------------------------------------


def _probability_fn(model: ModelSpec, bad: int | None) -> ProbabilityFn:
    if callable(model):
        return model
    return lambda u, inp, ev: model_probabilities(model, u, inp, ev, bad)


def forbidden_mass_sampled(
    model: ModelSpec,
    u: ModeUnitary,
    inp: InputConfig,
    size: int = 10_000,
    seed: int = 0,
    bad: int | None = None,
) -> Estimate:
    """Total forbidden probability, extrapolated from ``size`` random distinct forbidden events."""
    n, m = inp.n, u.m
    total = count_forbidden(n, m)
    size = min(size, total)
    events = random_forbidden_events(n, m, size, rngmod.stream(seed, "forbidden-subset"))
    probs = _probability_fn(model, bad)(u, inp, events)
    # finite-population correction: the subset is drawn without replacement
    fpc = (total - size) / (total - 1) if total > 1 else 0.0
    stderr = total * np.std(probs, ddof=1) / math.sqrt(size) * math.sqrt(fpc) if size > 1 else 0.0
    return Estimate(float(total * probs.mean()), float(stderr))


def expected_violation_exact(
    model: ModelSpec,
    u: ModeUnitary,
    inp: InputConfig,
    cap: int = DEFAULT_CAP,
    *,
    sample_size: int | None = None,
    seed: int = 0,
    bad: int | None = None,
) -> float:
    """Infinite-shot violation: total model probability of the forbidden events.

    Args:
        model: ``"boson"``, ``"classical"``, ``"misaligned"``, ``"uniform"`` or a
            callable ``(u, inp, events) -> probabilities``.
        cap: Largest event space to enumerate exhaustively.
        sample_size: When the event space exceeds ``cap``, extrapolate from this
            many random forbidden events instead of raising.

    Raises:
        CapExceededError: if the space is too large and ``sample_size`` is None.
    """
    n, m = inp.n, u.m
    if n == 1:
        return 0.0
    total = count_events(n, m)
    if total > cap:
        if sample_size is None:
            raise CapExceededError(total, cap)
        return forbidden_mass_sampled(model, u, inp, sample_size, seed, bad).value
    events = event_array(n, m, cap)
    events = events[forbidden_mask(events, n)]
    return float(np.sum(_probability_fn(model, bad)(u, inp, events)))


def _residue_characteristic(p: NDArray[np.float64], n: int) -> NDArray[np.complex128]:
    """``phi[..., t] = sum_q p[..., q] exp(2 pi i t q / n)`` for ``t = 0..n-1``, modes 1-based."""
    m = p.shape[-1]
    q = np.arange(1, m + 1)
    t = np.arange(n)
    kernel = np.exp(2j * np.pi * (np.outer(q, t) % n) / n)  # (m, n)
    return p @ kernel


def independent_violation(rows_p: NDArray[np.float64]) -> float:
    """Violation when particle ``l`` independently lands in mode ``q`` with ``rows_p[l, q]``.

    Uses the discrete Fourier transform over residues mod ``n`` instead of
    enumerating events, so any ``m`` is feasible.
    """
    n = rows_p.shape[0]
    phi = _residue_characteristic(rows_p, n)  # (n, n)
    allowed = np.prod(phi, axis=0).sum().real / n
    return float(1.0 - allowed)


def classical_violation(u: ModeUnitary, inp: InputConfig) -> float:
    return independent_violation(np.abs(u.entries[inp.rows()]) ** 2)


def meanfield_violation(
    u: ModeUnitary, inp: InputConfig, draws: int = 10_000, seed: int = 0
) -> Estimate:
    """Phase-averaged violation of the mean-field sampler.

    For each phase draw all ``n`` particles share one distribution, so the
    allowed probability is ``(1/n) sum_t phi(t)**n``; the result averages over
    ``draws`` random phase settings.
    """
    n = inp.n
    rows = u.entries[inp.rows()]
    theta = rngmod.stream(seed, "meanfield-violation").random((draws, n)) * 2 * np.pi
    p = meanfield_distribution(rows, theta)
    phi = _residue_characteristic(p, n)  # (draws, n)
    v = 1.0 - (phi**n).sum(axis=1).real / n
    return Estimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0)


# -- witnesses ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WitnessSummary:
    """Coincidence probability, clouding and mean occupations with standard errors.

    ``clouding`` is None when it was not computed (odd ``m``).
    """

    p1: float
    clouding: float | None
    mean_occupations: NDArray[np.float64]
    p1_stderr: float = 0.0
    clouding_stderr: float | None = None
    occupation_stderr: NDArray[np.float64] | None = None
    model: str = "unknown"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "P1": self.p1,
            "P1_stderr": self.p1_stderr,
            "C": self.clouding,
            "C_stderr": self.clouding_stderr,
            "mean_occupations": self.mean_occupations.tolist(),
            "mean_occupations_stderr": None
            if self.occupation_stderr is None
            else self.occupation_stderr.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self, n: int) -> list[tuple]:
        m = len(self.mean_occupations)
        rows = [(self.model, n, m, "", "P1", self.p1, self.p1_stderr)]
        if self.clouding is not None:
            rows.append((self.model, n, m, "", "C", self.clouding, self.clouding_stderr))
        occ_err = self.occupation_stderr if self.occupation_stderr is not None else np.zeros(m)
        for q, (v, s) in enumerate(zip(self.mean_occupations, occ_err), start=1):
            rows.append((self.model, n, m, q, "mean_occupation", float(v), float(s)))
        return rows


def mean_occupations_exact(u: ModeUnitary, inp: InputConfig) -> NDArray[np.float64]:
    """``<n_k> = sum_l |U[j_l, k]|^2``."""
    return np.sum(np.abs(u.entries[inp.rows()]) ** 2, axis=0)


def _want_clouding(m: int, clouding: bool | None) -> bool:
    if clouding and m % 2:
        raise ValueError(f"clouding needs an even number of modes, got m = {m}")
    return (m % 2 == 0) if clouding is None else clouding


def elementary_symmetric(p: NDArray[np.float64], k: int) -> NDArray[np.float64]:
    """``e_k`` of the last axis of ``p``."""
    e = np.zeros(p.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    for q in range(p.shape[-1]):
        e[..., 1:] = e[..., 1:] + p[..., q, None] * e[..., :-1]
    return e[..., k]


def _batch_witnesses(batch: SampleBatch, clouding: bool | None) -> WitnessSummary:
    ev, N, m = batch.events, batch.shots, batch.m
    cf = collision_free_mask(ev)
    p1 = cf.mean()
    c = c_err = None
    if _want_clouding(m, clouding):
        sh = same_half_mask(ev, m)
        c = float(sh.mean())
        c_err = math.sqrt(c * (1 - c) / N)
    occ = np.zeros((N, m))
    np.add.at(occ, (np.repeat(np.arange(N), batch.n), ev.ravel() - 1), 1)
    return WitnessSummary(
        float(p1),
        c,
        occ.mean(axis=0),
        math.sqrt(p1 * (1 - p1) / N),
        c_err,
        occ.std(axis=0, ddof=1) / math.sqrt(N) if N > 1 else np.zeros(m),
        batch.model,
    )


def _exact_witnesses(
    model: ModelSpec, u: ModeUnitary, inp: InputConfig, cap: int, clouding: bool | None,
    bad: int | None,
) -> WitnessSummary:
    n, m = inp.n, u.m
    events = event_array(n, m, cap)
    p = _probability_fn(model, bad)(u, inp, events)
    occ = np.zeros(m)
    for c in range(n):
        occ += np.bincount(events[:, c] - 1, weights=p, minlength=m)
    c_val = float(p[same_half_mask(events, m)].sum()) if _want_clouding(m, clouding) else None
    name = model if isinstance(model, str) else getattr(model, "__name__", "custom")
    return WitnessSummary(
        float(p[collision_free_mask(events)].sum()),
        c_val,
        occ,
        0.0,
        0.0 if c_val is not None else None,
        np.zeros(m),
        name,
    )


def meanfield_witnesses(
    u: ModeUnitary,
    inp: InputConfig,
    draws: int = 10_000,
    seed: int = 0,
    clouding: bool | None = None,
) -> WitnessSummary:
    """Witnesses of the mean-field sampler, exact per phase setting and averaged over ``draws``.

    Given one phase setting with distribution ``p``, the collision-free
    probability is ``n! e_n(p)`` and the clouding probability is
    ``(sum_lower p)**n + (sum_upper p)**n``.
    """
    n, m = inp.n, u.m
    rows = u.entries[inp.rows()]
    theta = rngmod.stream(seed, "meanfield-witness").random((draws, n)) * 2 * np.pi
    p = meanfield_distribution(rows, theta)
    se = (lambda x: float(x.std(ddof=1) / math.sqrt(draws))) if draws > 1 else (lambda x: 0.0)
    p1 = factorial(n) * elementary_symmetric(p, n)
    c = c_err = None
    if _want_clouding(m, clouding):
        lower = p[:, : m // 2].sum(axis=1)
        upper = p[:, m // 2 :].sum(axis=1)
        cl = lower**n + upper**n
        c, c_err = float(cl.mean()), se(cl)
    occ = n * p
    occ_err = occ.std(axis=0, ddof=1) / math.sqrt(draws) if draws > 1 else np.zeros(m)
    return WitnessSummary(float(p1.mean()), c, occ.mean(axis=0), se(p1), c_err, occ_err, "meanfield")


def witnesses(
    source: SampleBatch | ModelSpec,
    u: ModeUnitary | None = None,
    inp: InputConfig | None = None,
    *,
    cap: int = DEFAULT_CAP,
    clouding: bool | None = None,
    draws: int = 10_000,
    seed: int = 0,
    bad: int | None = None,
) -> WitnessSummary:
    """Coincidence probability P1, clouding C and mean occupations.

    Args:
        source: A sampled batch (empirical estimates), an exact model name or
            probability function (enumeration), or ``"meanfield"`` (phase average).
        clouding: Force (True) or skip (False) clouding; by default it is
            computed whenever ``m`` is even.

    Raises:
        ValueError: if clouding is requested for odd ``m``.
    """
    if isinstance(source, SampleBatch):
        return _batch_witnesses(source, clouding)
    if u is None or inp is None:
        raise ValueError("model witnesses need a matrix and an input configuration")
    if source == "meanfield":
        return meanfield_witnesses(u, inp, draws, seed, clouding)
    return _exact_witnesses(source, u, inp, cap, clouding, bad)


# -- partial distinguishability ----------------------------------------------


def distinguishability_coeffs(overlap, tol: float = 1e-10) -> NDArray[np.complex128]:
    """Gram-Schmidt coefficients of the internal states.

    ``overlap[r, s] = <t_r|t_s>``. Row ``r`` of the result holds the coefficients
    of ``|t_r>`` in the orthonormal basis ``|t_1>, |t~_2>, ...`` built by
    orthogonalising the states in order; the matrix is lower triangular with
    real non-negative diagonal and unit-norm rows.

    Raises:
        ValueError: if ``overlap`` is not Hermitian PSD with unit diagonal.
    """
    g = np.array(overlap, dtype=np.complex128)
    n = g.shape[0]
    if g.shape != (n, n):
        raise ValueError("overlap matrix must be square")
    if not np.allclose(g, g.conj().T, atol=tol):
        raise ValueError("overlap matrix must be Hermitian")
    if not np.allclose(np.diag(g).real, 1.0, atol=tol):
        raise ValueError("internal states must be normalised (unit diagonal)")
    if np.linalg.eigvalsh(g).min() < -1e-8:
        raise ValueError("overlap matrix is not positive semidefinite")
    c = np.zeros((n, n), dtype=np.complex128)
    for r in range(n):
        for d in range(r):
            if c[d, d].real <= tol:
                continue  # |t_d> added no new basis direction
            # <t_d|t_r> = sum_e conj(c[d, e]) c[r, e]
            c[r, d] = (g[d, r] - np.vdot(c[d, :d], c[r, :d])) / c[d, d].real
        residual = 1.0 - np.sum(np.abs(c[r, :r]) ** 2)
        if residual < -1e-8:
            raise ValueError("overlap matrix is not positive semidefinite")
        c[r, r] = math.sqrt(max(residual, 0.0))
    return c


def indistinguishable_weight(c) -> float:
    """``prod_{q >= 2} |c[q, 1]|^2``, the weight of the fully interfering term."""
    c = np.asarray(c)
    return float(np.prod(np.abs(c[1:, 0]) ** 2))


def violation_bound_partial(c, n: int | None = None) -> float:
    """Upper-bound estimate ``(n-1)/n * (1 - prod_{q>=2} |c[q,1]|^2)``."""
    c = np.asarray(c)
    n = c.shape[0] if n is None else n
    return (n - 1) / n * (1.0 - indistinguishable_weight(c))


# -- matrix inaccuracies -----------------------------------------------------


def _warn_breakdown(n: int, avg_dev: float) -> None:
    if avg_dev >= 1.0 / n:
        warnings.warn(
            f"average deviation {avg_dev} is not below 1/n = {1 / n:.4g}; "
            "the first-order estimate is unreliable",
            RuntimeWarning,
            stacklevel=3,
        )


def p_approx(n: int, m: int, avg_dev: float) -> float:
    """First-order forbidden-event probability ``n n! / m**n * avg_dev**2``."""
    _warn_breakdown(n, avg_dev)
    return n * factorial(n) / m**n * avg_dev**2


class DevEstimate(NamedTuple):
    general: float
    closed_form: float | None


def v_dev_estimate(n: int, m: int, avg_dev: float) -> DevEstimate:
    """Violation caused by matrix deviations.

    ``general = (n-1)/n * C(m+n-1, n) * p_approx``; for ``m == n**2`` the
    large-``n`` form ``sqrt(e) (n-1) avg_dev**2`` is also returned.
    """
    _warn_breakdown(n, avg_dev)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        general = (n - 1) / n * count_events(n, m) * p_approx(n, m, avg_dev)
    closed = math.sqrt(math.e) * (n - 1) * avg_dev**2 if m == n * n else None
    return DevEstimate(general, closed)


class NumericViolation(NamedTuple):
    """Ensemble result: mean over perturbation draws, its standard error, and the spread."""

    mean: float
    stderr: float
    std: float
    draws: int
    events_used: int
    forbidden_total: int


def forbidden_mass(w: ModeUnitary, inp: InputConfig, events: NDArray[np.int64]) -> float:
    """Total boson probability of the given events under ``w``."""
    return float(np.sum(boson_probabilities(w, inp, events)))


def v_dev_numeric(
    u: ModeUnitary,
    inp: InputConfig,
    avg_dev: float,
    draws: int = 400,
    sample_size: int = 200,
    seed: int = 0,
) -> NumericViolation:
    """Monte-Carlo violation of a perturbed matrix ensemble.

    For each of ``draws`` perturbations with mean ``|delta| = avg_dev``, sums
    the boson probability of ``sample_size`` random forbidden events (all of
    them if fewer exist) and rescales to the full forbidden count.

    Raises:
        ValueError: if no forbidden events exist (``n == 1``).
    """
    n, m = inp.n, u.m
    total = count_forbidden(n, m) if n > 1 else 0
    if total == 0:
        raise ValueError("no forbidden events exist for this configuration")
    use_all = total <= sample_size
    if use_all:
        events = event_array(n, m)
        events = events[forbidden_mask(events, n)]
    gen = rngmod.stream(seed, "v-dev")
    seeds = gen.integers(0, 2**63 - 1, size=draws)
    values = np.empty(draws)
    for i, s in enumerate(seeds):
        w, _ = perturb(u, avg_dev, int(s))
        ev = events if use_all else random_forbidden_events(n, m, sample_size, gen)
        values[i] = forbidden_mass(w, inp, ev) * total / len(ev)
    std = float(values.std(ddof=1)) if draws > 1 else 0.0
    used = total if use_all else sample_size
    return NumericViolation(float(values.mean()), std / math.sqrt(draws), std, draws, used, total)


def v_total(v_partial: float, v_dev: float) -> float:
    """Combined violation, treating both error sources as independent (an approximation)."""
    return v_partial + v_dev


# -- CSV reporting -----------------------------------------------------------


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def format_csv(rows: Iterable[Sequence], meta: dict | None = None) -> str:
    """Rows in the shared ``model,n,m,param,quantity,value,stderr`` schema.

    ``meta`` entries are written first as ``# key=value`` comment lines.
    """
    buf = io.StringIO()
    for key, val in (meta or {}).items():
        buf.write(f"# {key}={val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"CSV row {row} does not match {CSV_COLUMNS}")
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()
