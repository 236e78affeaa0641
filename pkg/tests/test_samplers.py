import numpy as np
import pytest
from scipy import integrate

from bosoncert import (
    CapExceededError,
    InputConfig,
    SampleBatch,
    count_events,
    event_array,
    make_fourier,
    make_haar_random,
    sample_boson,
    sample_classical,
    sample_meanfield,
    sample_misaligned,
    sample_uniform,
)
from bosoncert.certify import forbidden_mask, mean_occupations_exact
from bosoncert.permanent import model_probabilities
from bosoncert.samplers import header_path, meanfield_distribution, probability_table, sample
from conftest import within_sigmas

SHOTS = 100_000


def _freqs(batch, events):
    uniq, counts = batch.frequencies()
    lookup = {tuple(r): c for r, c in zip(uniq, counts)}
    return np.array([lookup.get(tuple(r), 0) for r in events]) / batch.shots


def test_uniform_single_particle():
    b = sample_uniform(1, 2, SHOTS, seed=1)
    assert within_sigmas((b.events[:, 0] == 1).mean(), 0.5, SHOTS)


def test_uniform_two_in_two():
    b = sample_uniform(2, 2, SHOTS, seed=2)
    assert within_sigmas(_freqs(b, event_array(2, 2)), 1 / 3, SHOTS).all()


def test_uniform_deterministic():
    assert sample_uniform(3, 5, 500, seed=9) == sample_uniform(3, 5, 500, seed=9)
    assert sample_uniform(3, 5, 500, seed=9) != sample_uniform(3, 5, 500, seed=10)


def test_uniform_ignores_matrix_dispatch():
    b = sample("uniform", None, None, 10, seed=1, n=2, m=3)
    assert b.events.shape == (10, 2) and b.model == "uniform"


@pytest.mark.parametrize("k", [1, 2, 3])
def test_classical_single_particle(k):
    u = make_haar_random(4, seed=7)
    inp = InputConfig((2,))
    b = sample_classical(u, inp, SHOTS, seed=3)
    p = np.abs(u.entries[1]) ** 2
    assert within_sigmas((b.events[:, 0] == k).mean(), p[k - 1], SHOTS)


def test_classical_beam_splitter(beam_splitter):
    u, inp = beam_splitter
    b = sample_classical(u, inp, SHOTS, seed=4)
    assert within_sigmas((b.events[:, 0] != b.events[:, 1]).mean(), 0.5, SHOTS)


def test_classical_fourier_marginals(fourier3):
    u, inp = fourier3
    b = sample_classical(u, inp, SHOTS, seed=5)
    occ = np.bincount(b.events.ravel() - 1, minlength=9) / SHOTS
    # each mode's count per shot is Binomial(3, 1/9)
    sigma = np.sqrt(3 * (1 / 9) * (8 / 9) / SHOTS)
    assert (np.abs(occ - 3 / 9) <= 4 * sigma).all()


def test_classical_rejects_unnormalised():
    from bosoncert.linalg import ModeUnitary
    u = ModeUnitary(np.diag([1.0, 1.0, 1.0]), label="custom")
    with pytest.raises(ValueError):
        sample_classical(u, InputConfig((1, 4)), 10, seed=0)


def test_meanfield_single_particle_reduces_to_classical():
    u = make_haar_random(5, seed=6)
    inp = InputConfig((3,))
    theta = np.random.default_rng(0).random((50, 1)) * 2 * np.pi
    p = meanfield_distribution(u.entries[inp.rows()], theta)
    np.testing.assert_allclose(p, np.broadcast_to(np.abs(u.entries[2]) ** 2, p.shape), atol=1e-14)


def test_meanfield_distribution_normalised():
    u = make_haar_random(9, seed=1)
    rows = u.entries[[0, 3, 5]]
    theta = np.random.default_rng(1).random((200, 3)) * 2 * np.pi
    np.testing.assert_allclose(meanfield_distribution(rows, theta).sum(axis=1), 1.0, atol=1e-10)
    sample_meanfield(u, InputConfig((1, 4, 6)), 1000, seed=1, check=True)


def test_meanfield_hom_matches_quadrature(beam_splitter):
    u, inp = beam_splitter
    rows = u.entries[inp.rows()]

    def coincidence(delta):
        p = meanfield_distribution(rows, np.array([[0.0, delta]]))[0]
        return 2 * p[0] * p[1]

    oracle = integrate.quad(coincidence, 0, 2 * np.pi)[0] / (2 * np.pi)
    assert oracle == pytest.approx(0.25, abs=1e-12)
    b = sample_meanfield(u, inp, SHOTS, seed=8)
    assert within_sigmas((b.events[:, 0] != b.events[:, 1]).mean(), oracle, SHOTS)


def test_meanfield_frozen_phases_correlate(beam_splitter):
    u, inp = beam_splitter
    b = sample_meanfield(u, inp, 20_000, seed=3, freeze_phases=True)
    assert b.params == {"freeze_phases": True}
    # one phase setting: coincidence is 2 p1 p2 for that setting, not the phase average
    theta = __import__("bosoncert.rng", fromlist=["stream"]).stream(3, "meanfield-frozen").random((1, 2)) * 2 * np.pi
    p = meanfield_distribution(u.entries[inp.rows()], theta)[0]
    assert within_sigmas((b.events[:, 0] != b.events[:, 1]).mean(), 2 * p[0] * p[1], 20_000)


def test_boson_hom(beam_splitter):
    u, inp = beam_splitter
    b = sample_boson(u, inp, SHOTS, seed=10)
    assert not (b.events[:, 0] != b.events[:, 1]).any()
    assert within_sigmas((b.events[:, 0] == 1).mean(), 0.5, SHOTS)


def test_boson_fourier_never_forbidden(fourier3):
    u, inp = fourier3
    b = sample_boson(u, inp, SHOTS, seed=11)
    assert not forbidden_mask(b.events, 3).any()


def test_boson_cap():
    u = make_fourier(9)
    with pytest.raises(CapExceededError):
        sample_boson(u, InputConfig((1, 2, 3)), 10, seed=0, cap=100)


def test_boson_single_particle():
    u = make_haar_random(4, seed=5)
    b = sample_boson(u, InputConfig((4,)), SHOTS, seed=12)
    p = np.abs(u.entries[3]) ** 2
    freq = np.bincount(b.events[:, 0] - 1, minlength=4) / SHOTS
    assert within_sigmas(freq, p, SHOTS).all()


def test_misaligned_destroys_hom(beam_splitter):
    u, inp = beam_splitter
    b = sample_misaligned(u, inp, 2, SHOTS, seed=13)
    assert within_sigmas((b.events[:, 0] != b.events[:, 1]).mean(), 0.5, SHOTS)
    assert b.params == {"bad": 2}


@pytest.mark.parametrize("n, m", [(2, 4), (3, 9)])
@pytest.mark.parametrize("model", ["uniform", "classical", "boson", "misaligned"])
def test_exact_distribution_equivalence(n, m, model):
    u = make_haar_random(m, seed=100 + n)
    inp = InputConfig(tuple(range(1, n + 1)))
    ev = event_array(n, m)
    p = model_probabilities(model, u, inp, ev)
    b = sample(model, u, inp, SHOTS, seed=77)
    assert within_sigmas(_freqs(b, ev), p, SHOTS).all()


@pytest.mark.parametrize("model", ["classical", "meanfield", "boson"])
def test_mean_occupation_matches_single_particle_formula(model):
    u = make_haar_random(9, seed=21)
    inp = InputConfig((1, 2, 3))
    b = sample(model, u, inp, SHOTS, seed=31)
    counts = np.zeros((SHOTS, 9))
    np.add.at(counts, (np.repeat(np.arange(SHOTS), 3), b.events.ravel() - 1), 1)
    se = counts.std(axis=0, ddof=1) / np.sqrt(SHOTS)
    assert (np.abs(counts.mean(axis=0) - mean_occupations_exact(u, inp)) <= 4 * se).all()


@pytest.mark.parametrize("model", ["uniform", "classical", "meanfield", "boson", "misaligned"])
def test_thread_count_independent(model, fourier3):
    u, inp = fourier3
    a = sample(model, u, inp, 10_000, seed=5, workers=1)
    b = sample(model, u, inp, 10_000, seed=5, workers=4)
    assert a == b


def test_batch_invariants(fourier3):
    u, inp = fourier3
    b = sample_classical(u, inp, 100, seed=0)
    assert b.shots == len(b) == 100
    assert all(e.n == 3 and e.modes[-1] <= 9 for e in b)
    with pytest.raises(ValueError):
        b.events[0, 0] = 1
    with pytest.raises(ValueError):
        SampleBatch("uniform", np.array([[0, 1]]), 0, 2, 3)
    with pytest.raises(ValueError):
        sample_uniform(2, 2, 0, seed=1)


def test_batch_save_load(tmp_path, fourier3):
    u, inp = fourier3
    b = sample_meanfield(u, inp, 50, seed=4)
    path = tmp_path / "b.jsonl"
    b.save(path)
    assert header_path(path).exists()
    back = SampleBatch.load(path)
    assert back == b
    assert back.header()["seed"] == 4


def test_batch_load_without_header(tmp_path):
    path = tmp_path / "raw.jsonl"
    path.write_text('{"k": [1, 3]}\n{"k": [2, 2]}\n')
    b = SampleBatch.load(path)
    assert (b.n, b.m, b.shots) == (2, 3, 2)


def test_frequency_csv(beam_splitter):
    u, inp = beam_splitter
    text = sample_boson(u, inp, 10, seed=1).frequency_csv()
    lines = text.splitlines()
    assert lines[0] == "event,count,frequency"
    assert sum(int(l.split(",")[1]) for l in lines[1:]) == 10


def test_probability_table_reusable(fourier3):
    u, inp = fourier3
    t = probability_table("boson", u, inp)
    assert t.cdf[-1] == pytest.approx(1.0, abs=1e-9)
    assert len(t.events) == count_events(3, 9)
