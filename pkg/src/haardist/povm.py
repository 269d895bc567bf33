"""Product POVM sets: computational PVM, tetrad SIC and Pauli NON-SIC.

Element ``mu`` of an n-qubit set is ``scale * kron(locals[mu_0], ..., locals[mu_{n-1}])``
with ``mu`` written in base ``len(locals)`` and qubit 0 as the most
significant digit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, DomainError
from .qsim import DensityState
from .spectra import Spectrum

KINDS = ("pvm", "sic", "nonsic")


def _ket(*amps) -> np.ndarray:
    v = np.array(amps, dtype=np.complex128)
    return v / np.linalg.norm(v)


def _proj(v) -> np.ndarray:
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class MeasurementSet:
    """An n-qubit product POVM.

    ``local_eigenvalues[i]`` lists the eigenvalues (with repetition) of
    ``locals[i]``; element spectra are products of these times ``scale``.
    """

    kind: str
    n: int
    locals: Tuple[np.ndarray, ...] = field(repr=False)
    local_eigenvalues: Tuple[Tuple[object, ...], ...] = field(repr=False)
    scale: Fraction = Fraction(1)

    @property
    def arity(self) -> int:
        return len(self.locals)

    @property
    def dim(self) -> int:
        return 2**self.n

    def __len__(self) -> int:
        return self.arity**self.n

    def digits(self, mu: int) -> Tuple[int, ...]:
        if not 0 <= mu < len(self):
            raise DomainError(f"element index {mu} outside [0, {len(self)})")
        out = []
        for _ in range(self.n):
            mu, r = divmod(mu, self.arity)
            out.append(r)
        return tuple(reversed(out))

    def label(self, mu: int) -> str:
        return "".join(str(d) for d in self.digits(mu))

    def element(self, mu: int) -> np.ndarray:
        mats = [self.locals[d] for d in self.digits(mu)]
        return float(self.scale) * reduce(np.kron, mats, np.ones((1, 1), dtype=np.complex128))

    def elements(self) -> Iterable[np.ndarray]:
        for mu in range(len(self)):
            yield self.element(mu)

    def local_sum(self) -> np.ndarray:
        return sum(self.locals)

    def completeness_error(self, dense: bool = None) -> float:
        """max |sum_mu Pi_mu - I| entrywise.

        Dense summation over all elements for n <= 4 (or when ``dense``);
        otherwise through the local-sum identity.
        """
        if dense is None:
            dense = self.n <= 4
        if dense:
            total = sum(self.elements())
        else:
            local = float(self.scale) ** (1 / self.n) * self.local_sum()
            total = reduce(np.kron, [local] * self.n)
        return float(np.max(np.abs(total - np.eye(self.dim))))


def build_pvm(n: int) -> MeasurementSet:
    """Computational-basis projectors |mu><mu|."""
    _check_n(n)
    locals_ = (_proj(_ket(1, 0)), _proj(_ket(0, 1)))
    eigs = ((Fraction(0), Fraction(1)),) * 2
    return MeasurementSet("pvm", n, locals_, eigs, Fraction(1))


def tetrad_states() -> Tuple[np.ndarray, ...]:
    """|0> and cos(t/2)|0> + e^{i mu 2pi/3} sin(t/2)|1>, cos(t/2) = 1/sqrt(3)."""
    c = math.sqrt(1 / 3)
    s = math.sqrt(2 / 3)
    states = [_ket(1, 0)]
    for mu in (1, 2, 3):
        states.append(np.array([c, np.exp(1j * mu * 2 * np.pi / 3) * s], dtype=np.complex128))
    return tuple(states)


def build_sic(n: int) -> MeasurementSet:
    """Tetrad SIC-POVM scaled by 1/2^n so that the 4^n elements sum to I."""
    _check_n(n)
    locals_ = tuple(_proj(v) for v in tetrad_states())
    eigs = ((Fraction(0), Fraction(1)),) * 4
    return MeasurementSet("sic", n, locals_, eigs, Fraction(1, 2**n))


def build_nonsic(n: int) -> MeasurementSet:
    """Pauli set {|0><0|, |+><+|, |+i><+i|, |1><1| + |-><-| + |-i><-i|} scaled by 1/3^n."""
    _check_n(n)
    zero, one = _ket(1, 0), _ket(0, 1)
    plus, minus = _ket(1, 1), _ket(1, -1)
    plus_i, minus_i = _ket(1, 1j), _ket(1, -1j)
    rest = _proj(one) + _proj(minus) + _proj(minus_i)
    locals_ = (_proj(zero), _proj(plus), _proj(plus_i), rest)
    root3 = math.sqrt(3)
    eigs = (
        (Fraction(0), Fraction(1)),
        (Fraction(0), Fraction(1)),
        (Fraction(0), Fraction(1)),
        ((3 - root3) / 2, (3 + root3) / 2),
    )
    return MeasurementSet("nonsic", n, locals_, eigs, Fraction(1, 3**n))


def build_set(kind: str, n: int) -> MeasurementSet:
    builders = {"pvm": build_pvm, "sic": build_sic, "nonsic": build_nonsic}
    try:
        return builders[kind.lower()](n)
    except KeyError:
        raise DomainError(f"unknown POVM kind {kind!r}; choose from {KINDS}") from None


def _check_n(n):
    if n < 1:
        raise DomainError("need at least one qubit")


def element_spectrum(mset: MeasurementSet, mu: int) -> Spectrum:
    """Spectrum of element ``mu``: products of local eigenvalues times the scale."""
    factors = [mset.local_eigenvalues[d] for d in mset.digits(mu)]
    values = []
    for combo in itertools.product(*factors):
        prod = mset.scale
        for v in combo:
            prod = prod * v
        values.append(prod)
    return Spectrum.from_eigenvalues(values)


def probabilities(state: DensityState, mset: MeasurementSet) -> np.ndarray:
    """p_mu = tr(Pi_mu rho) for every element, in lexicographic order of mu.

    Contracts one qubit at a time against all local operators, so the
    partial contraction for a shared prefix of mu is computed once.
    """
    if state.n != mset.n:
        raise DimensionMismatch(f"state has {state.n} qubits, measurement set has {mset.n}")
    ops = np.stack(mset.locals)  # (K, 2, 2)
    work = state.matrix.reshape(1, state.dim, state.dim)
    for q in range(mset.n):
        rest = 2 ** (mset.n - q - 1)
        t = work.reshape(work.shape[0], 2, rest, 2, rest)
        # tr(L rho) = sum_ij L_ji rho_ij
        work = np.einsum("kji,aixjy->akxy", ops, t).reshape(-1, rest, rest)
    return float(mset.scale) * work.reshape(-1).real


def total_distribution_samples(states: Sequence[DensityState], mset: MeasurementSet) -> np.ndarray:
    """Concatenated probabilities over all states (sample-major, element-minor)."""
    if len(states) == 0:
        raise DomainError("need at least one state")
    return np.concatenate([probabilities(rho, mset) for rho in states])


def write_samples_csv(path, samples: np.ndarray, mset: MeasurementSet) -> None:
    """CSV with columns sample_index, element_index, probability."""
    size = len(mset)
    with open(path, "w") as fh:
        fh.write("sample_index,element_index,probability\n")
        for i, p in enumerate(samples):
            fh.write(f"{i // size},{mset.label(i % size)},{p!r}\n")


def write_samples_binary(path, samples: np.ndarray) -> None:
    """Little-endian float64 stream in (sample-major, element-minor) order."""
    np.ascontiguousarray(samples, dtype="<f8").tofile(path)


def read_samples_binary(path) -> np.ndarray:
    return np.fromfile(path, dtype="<f8")
