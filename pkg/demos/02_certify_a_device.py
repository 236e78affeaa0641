"""Certifying a sampler against the Fourier suppression law.

With the cyclic input on the m = n**2 Fourier matrix, ideal bosons never
produce an event whose mode sum is indivisible by n. Counting such events in a
batch gives the violation, and a clean batch bounds the chance that a
structureless source passed by luck.
"""

from bosoncert import make_cyclic_input, make_fourier, required_runs, violation
from bosoncert.samplers import sample

n = 3
u, inp = make_fourier(n * n), make_cyclic_input(n)
print("input modes:", inp.modes)

for model in ("boson", "classical", "meanfield", "misaligned", "uniform"):
    batch = sample(model, u, inp, 5_000, seed=11)
    rep = violation(batch)
    extra = f", false-accept probability {rep.false_accept_prob:.1e}" if rep.false_accept_prob else ""
    print(f"{model:>10}: V = {rep.violation:.3f} ({rep.n_forbidden}/{rep.n_runs}){extra}")

# How many clean events are needed before a lucky pass drops below 1e-6?
for size in (3, 10, 100):
    print(f"n = {size}: {required_runs(size, 1e-6)} clean events for confidence 1e-6")
