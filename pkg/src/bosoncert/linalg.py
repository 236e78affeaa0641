"""Mode-transformation matrices: Fourier, Haar-random, quantum-walk and perturbed.

Mode indices are 1-based at the API boundary (``entry(l, q)``, input mode lists,
event mode lists) and 0-based inside the stored arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .events import InputConfig

Label = Literal["haar", "fourier", "walk", "perturbed", "custom"]
LABELS = ("haar", "fourier", "walk", "perturbed", "custom")

UNITARITY_TOL = 1e-10


def unitarity_defect(entries: NDArray[np.complex128]) -> float:
    """Max-norm of ``U^dagger U - I``."""
    m = entries.shape[0]
    return float(np.max(np.abs(entries.conj().T @ entries - np.eye(m)))) if m else 0.0


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """An ``m x m`` single-particle transformation with provenance.

    ``entries[l - 1, q - 1]`` is the amplitude for a particle entering mode ``l``
    to leave in mode ``q``.
    """

    entries: NDArray[np.complex128]
    label: Label = "custom"
    unitarity_defect: float = field(init=False)

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        defect = unitarity_defect(a)
        object.__setattr__(self, "unitarity_defect", defect)
        if self.label != "perturbed" and defect > UNITARITY_TOL:
            raise ValueError(
                f"matrix labelled {self.label!r} is not unitary (defect {defect:.3e})"
            )

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def entry(self, l: int, q: int) -> complex:
        return complex(self.entries[l - 1, q - 1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModeUnitary):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.entries, other.entries)

    __hash__ = None  # type: ignore[assignment]

    def to_json(self) -> str:
        # json emits floats with repr(), the shortest exact round-trip decimal form
        payload = {
            "m": self.m,
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
            "label": self.label,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ModeUnitary":
        payload = json.loads(text)
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload["im"], dtype=float)
        if re.shape != (payload["m"], payload["m"]) or im.shape != re.shape:
            raise ValueError("matrix JSON has inconsistent dimensions")
        return cls(re + 1j * im, label=payload.get("label", "custom"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModeUnitary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True, eq=False)
class PerturbationField:
    """Relative deviations ``delta`` applied entry-wise to a matrix."""

    entries: NDArray[np.complex128]

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.complex128)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def avg_magnitude(self) -> float:
        """Arithmetic mean of ``|delta_{l,q}|`` over all entries."""
        return float(np.mean(np.abs(self.entries)))


def make_fourier(m: int) -> ModeUnitary:
    """Fourier matrix with entries ``exp(2 pi i l q / m) / sqrt(m)``, ``l, q = 1..m``.

    Args:
        m: Number of modes.

    Returns:
        ModeUnitary labelled ``"fourier"``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    idx = np.arange(1, m + 1)
    # reduce l*q mod m in integers before scaling so the phase stays exact for large m
    phase = (np.outer(idx, idx) % m) * (2 * np.pi / m)
    return ModeUnitary(np.exp(1j * phase) / np.sqrt(m), label="fourier")


def make_cyclic_input(n: int, p: int = 2) -> InputConfig:
    """Cyclically symmetric input ``(1, n^(p-1)+1, ..., (n-1) n^(p-1)+1)`` on ``m = n^p`` modes."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if p < 2:
        raise ValueError("p must be >= 2")
    stride = n ** (p - 1)
    m = stride * n
    if m > np.iinfo(np.int64).max:
        raise OverflowError(f"mode count n**p = {n}**{p} exceeds the int64 range")
    return InputConfig(tuple(r * stride + 1 for r in range(n)), m=m)


def make_haar_random(m: int, seed: int) -> ModeUnitary:
    """Haar-distributed unitary from the QR decomposition of a complex Ginibre matrix.

    The phases of ``R``'s diagonal are folded back into ``Q`` so that the result
    does not inherit the LAPACK sign convention.

    Args:
        m: Number of modes.
        seed: Non-negative integer seed; equal seeds give identical matrices.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return ModeUnitary(q, label="haar")


BEAM_SPLITTER = np.array([[1, 1j], [1j, 1]], dtype=np.complex128) / np.sqrt(2)


def make_walk_matrix(m: int, steps: int) -> ModeUnitary:
    """Brick-wall mesh of balanced beam splitters.

    Odd-numbered steps couple modes ``(1,2), (3,4), ...``; even-numbered steps
    couple ``(2,3), (4,5), ...``, leaving modes 1 and ``m`` untouched. Each
    coupler is ``[[1, i], [i, 1]] / sqrt(2)``.

    Args:
        m: Even number of modes.
        steps: Number of layers, at least 1.
    """
    if m < 2 or m % 2:
        raise ValueError(f"walk matrix needs an even number of modes >= 2, got {m}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    u = np.eye(m, dtype=np.complex128)
    for step in range(steps):
        layer = np.eye(m, dtype=np.complex128)
        for a in range(step % 2, m - 1, 2):
            layer[a : a + 2, a : a + 2] = BEAM_SPLITTER
        # row convention: amplitudes propagate as row vectors, a_out = a_in @ U
        u = u @ layer
    return ModeUnitary(u, label="walk")


def perturb(
    u: ModeUnitary, target_avg: float, seed: int
) -> tuple[ModeUnitary, PerturbationField]:
    """Multiply every entry by ``1 + delta`` with a random complex ``delta``.

    Magnitudes are half-normal draws rescaled so that their mean is exactly
    ``target_avg``; phases are uniform.

    Args:
        u: Matrix to perturb.
        target_avg: Requested mean ``|delta|``, in ``[0, 1)``.
        seed: Non-negative integer seed.

    Returns:
        The perturbed (generally non-unitary) matrix and the field used.
    """
    if not 0 <= target_avg < 1:
        raise ValueError(f"target_avg must lie in [0, 1), got {target_avg}")
    m = u.m
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mag = np.abs(rng.standard_normal((m, m)))
    phase = rng.random((m, m))
    mag *= target_avg / mag.mean()
    delta = mag * np.exp(2j * np.pi * phase)
    w = u.entries * (1 + delta)
    return ModeUnitary(w, label="perturbed"), PerturbationField(delta)
