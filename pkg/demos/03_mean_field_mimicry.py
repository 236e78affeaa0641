"""Why bunching statistics cannot tell bosons from a mean-field sampler.

The collision-free probability P1 on Haar-random matrices and the clouding
probability C on a quantum-walk matrix are nearly the same for bosons and for
single particles with random relative phases. Distinguishable particles stand
apart. The suppression-law violation separates all three.
"""

from bosoncert import experiments

print("P1 on Haar-random matrices, m = n**2 (ensemble of 20)")
for model, n, m, _, qty, value, err in experiments.fig2a((3,), ensemble=20, draws=2_000, seed=3):
    if qty == "P1":
        print(f"  n={n} {model:>10}: {value:.4f} +- {err:.4f}")

print("Clouding on an 8-mode walk after 8 layers, centred inputs")
for model, n, m, steps, qty, value, err in experiments.fig2b((3, 4), draws=2_000, seed=3):
    print(f"  n={n} {model:>10}: C = {value:.4f}")

print("Suppression-law violation on the Fourier matrix")
for model, n, m, _, qty, value, err in experiments.fig3((2, 3, 4), draws=2_000, seed=3):
    if model != "reference":
        print(f"  n={n} {model:>10}: V = {value:.4f}")
