"""Spectra of Hermitian operators and their exact affine transformations.

A :class:`Spectrum` stores the distinct eigenvalues of an operator together
with their multiplicities. Rational inputs (``int``, :class:`~fractions.Fraction`
or ``"p/q"`` strings) are kept as exact fractions; floats are kept as floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Tuple, Union

from .errors import DegenerateSpectrum, DomainError

Number = Union[Fraction, float]

MERGE_RTOL = 1e-12


def as_number(value) -> Number:
    """Coerce ``value`` to an exact Fraction when rational, else a float."""
    if isinstance(value, bool):
        raise TypeError("booleans are not eigenvalues")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    value = float(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("eigenvalues must be finite")
    return value


def _close(a: Number, b: Number) -> bool:
    if a == b:
        return True
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return False
    return abs(a - b) <= MERGE_RTOL * max(1.0, abs(float(a)))


def _canonical(entries: Iterable[Tuple[object, int]]) -> Tuple[Tuple[Number, int], ...]:
    items = []
    for value, mult in entries:
        mult = int(mult)
        if mult < 1:
            raise ValueError(f"multiplicity must be positive, got {mult}")
        items.append((as_number(value), mult))
    if not items:
        raise ValueError("spectrum needs at least one eigenvalue")
    items.sort(key=lambda item: item[0])

    merged = [list(items[0])]
    for value, mult in items[1:]:
        last = merged[-1]
        if _close(last[0], value):
            if last[0] != value:
                # multiplicity-weighted mean keeps the trace
                last[0] = (last[0] * last[1] + value * mult) / (last[1] + mult)
            last[1] += mult
        else:
            merged.append([value, mult])
    return tuple((v, m) for v, m in merged)


@dataclass(frozen=True)
class Spectrum:
    """Distinct eigenvalues with multiplicities, sorted ascending."""

    entries: Tuple[Tuple[Number, int], ...]

    def __init__(self, entries: Iterable[Tuple[object, int]]):
        object.__setattr__(self, "entries", _canonical(entries))

    @classmethod
    def from_eigenvalues(cls, values: Iterable[object]) -> "Spectrum":
        """Build from a flat list of (possibly repeated) eigenvalues."""
        return cls((v, 1) for v in values)

    @classmethod
    def projector(cls, rank: int, dim: int) -> "Spectrum":
        if not 0 <= rank <= dim or dim < 1:
            raise ValueError(f"invalid projector rank {rank} for dimension {dim}")
        return cls([(0, dim - rank), (1, rank)] if 0 < rank < dim else [(int(rank > 0), dim)])

    @property
    def eigenvalues(self) -> Tuple[Number, ...]:
        return tuple(v for v, _ in self.entries)

    @property
    def multiplicities(self) -> Tuple[int, ...]:
        return tuple(m for _, m in self.entries)

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    @property
    def num_distinct(self) -> int:
        return len(self.entries)

    @property
    def trace(self) -> Number:
        return sum((v * m for v, m in self.entries), Fraction(0))

    @property
    def rank(self) -> int:
        return sum(m for v, m in self.entries if v != 0)

    @property
    def lowest(self) -> Number:
        return self.entries[0][0]

    @property
    def highest(self) -> Number:
        return self.entries[-1][0]

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.eigenvalues)

    def mean(self) -> Number:
        """Haar mean of the expectation value, tr(Pi)/d."""
        return self.trace / self.dim

    def affine(self, scale, shift) -> "Spectrum":
        """Spectrum of ``scale * Pi + shift * I``."""
        scale, shift = as_number(scale), as_number(shift)
        if scale == 0:
            return Spectrum([(shift, self.dim)])
        return Spectrum((scale * v + shift, m) for v, m in self.entries)

    def to_json(self) -> list:
        return [
            {"eigenvalue": _encode_number(v), "multiplicity": m} for v, m in self.entries
        ]

    @classmethod
    def from_json(cls, data: Sequence[dict]) -> "Spectrum":
        return cls((item["eigenvalue"], item["multiplicity"]) for item in data)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def __str__(self) -> str:
        body = ", ".join(f"({_encode_number(v)}, {m})" for v, m in self.entries)
        return "{" + body + "}"


def _encode_number(value: Number):
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return value.numerator
        return f"{value.numerator}/{value.denominator}"
    return value


def normalize(spec: Spectrum) -> Tuple[Spectrum, Number, Number]:
    """Map eigenvalues onto [0, 1] via (xi - sigma) / (lambda - sigma).

    Returns the normalized spectrum together with ``shift = sigma`` and
    ``scale = lambda - sigma``; the original eigenvalues are recovered as
    ``x * scale + shift``.
    """
    if spec.num_distinct < 2:
        raise DegenerateSpectrum(f"spectrum {spec} has a single eigenvalue")
    shift = spec.lowest
    scale = spec.highest - spec.lowest
    entries = [((v - shift) / scale, m) for v, m in spec.entries]
    # pin the endpoints exactly; float division can land a hair off
    entries[0] = (type(entries[0][0])(0), entries[0][1])
    entries[-1] = (type(entries[-1][0])(1), entries[-1][1])
    return Spectrum(entries), shift, scale


def depolarize_spectrum(spec: Spectrum, gamma) -> Spectrum:
    """Spectrum of (1 - gamma) Pi + gamma tr(Pi)/d I."""
    gamma = as_number(gamma)
    if not 0 <= gamma <= 1:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0:
        return spec
    return spec.affine(1 - gamma, gamma * spec.mean())


def fig1_parameterization(gamma, k: int) -> Tuple[Number, int]:
    """Depth-k noise scale 1 - (1 - gamma)^k and environment dimension k + 1."""
    gamma = as_number(gamma)
    if not 0 <= gamma <= 1:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    if k < 0:
        raise DomainError(f"depth must be non-negative, got {k}")
    return 1 - (1 - gamma) ** k, k + 1
