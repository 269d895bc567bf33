"""Dense density-matrix simulation of noisy Haar brickwork circuits.

Layer ``i`` applies fresh Haar-random two-qubit unitaries on the pairs
(0,1), (2,3), ... when ``i`` is even and (1,2), (3,4), ... when ``i`` is odd
(open boundary; an unpaired edge qubit idles), followed by single-qubit
depolarizing noise on every qubit. Every gate draws from its own generator
seeded by ``(seed, sample, layer, gate)``, so results do not depend on
execution order.
"""

from __future__ import annotations

import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DimensionMismatch, DomainError
from .spectra import Spectrum

LOCAL_DIM = 2
MAX_LOCAL_GAMMA = LOCAL_DIM**2 / (LOCAL_DIM**2 - 1)
_MAGIC = b"HDST"


class NonCPWarning(UserWarning):
    """Local noise scale above 1: the channel is not completely positive."""


@dataclass
class DensityState:
    """Density matrix of ``n`` qubits (``d = 2**n``)."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        d = LOCAL_DIM**self.n
        if self.matrix.shape != (d, d):
            raise DimensionMismatch(f"expected a {d}x{d} matrix for n={self.n}, got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return LOCAL_DIM**self.n

    @classmethod
    def zero(cls, n: int) -> "DensityState":
        """|0...0><0...0|."""
        d = LOCAL_DIM**n
        m = np.zeros((d, d), dtype=np.complex128)
        m[0, 0] = 1
        return cls(n, m)

    @classmethod
    def basis(cls, n: int, index: int) -> "DensityState":
        d = LOCAL_DIM**n
        m = np.zeros((d, d), dtype=np.complex128)
        m[index, index] = 1
        return cls(n, m)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityState":
        d = LOCAL_DIM**n
        return cls(n, np.eye(d, dtype=np.complex128) / d)

    @classmethod
    def from_vector(cls, n: int, psi) -> "DensityState":
        psi = np.asarray(psi, dtype=np.complex128)
        psi = psi / np.linalg.norm(psi)
        return cls(n, np.outer(psi, psi.conj()))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)[0])

    def copy(self) -> "DensityState":
        return DensityState(self.n, self.matrix.copy())

    def to_bytes(self) -> bytes:
        header = _MAGIC + struct.pack("<II4x", self.n, 0)
        return header + np.ascontiguousarray(self.matrix, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DensityState":
        if blob[:4] != _MAGIC:
            raise ValueError("not a density-state dump")
        # 16-byte header: magic, u32 n, u32 reserved, 4 pad bytes
        n, _ = struct.unpack("<II", blob[4:12])
        d = LOCAL_DIM**n
        data = np.frombuffer(blob[16:], dtype="<c16")
        if data.size != d * d:
            raise ValueError(f"payload has {data.size} entries, expected {d * d}")
        return cls(n, data.reshape(d, d).astype(np.complex128))


@dataclass(frozen=True)
class CircuitConfig:
    n: int
    k: int
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("need at least one qubit")
        if self.k < 0:
            raise DomainError("depth must be non-negative")
        if not 0 <= self.gamma <= MAX_LOCAL_GAMMA:
            raise DomainError(f"gamma must lie in [0, {MAX_LOCAL_GAMMA}]")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    def layer_pairs(self, layer: int) -> List[tuple]:
        start = layer % 2
        return [(i, i + 1) for i in range(start, self.n - 1, 2)]

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "gamma": self.gamma,
            "seed": self.seed,
            "boundary": "open",
            "first_layer_parity": "even",
            "noise_after_every_layer": True,
            "gate_seed": "SeedSequence(seed, spawn_key=(sample, layer, gate))",
        }


def gate_rng(seed: int, sample: int, layer: int, gate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sample, layer, gate)))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    if dim < 1:
        raise DomainError("dimension must be positive")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    # fix the phase ambiguity of QR so the law is exactly Haar
    return q * (diag / np.abs(diag))


def apply_two_qubit(state: DensityState, unitary: np.ndarray, qubit: int) -> DensityState:
    """Apply ``unitary`` on qubits (qubit, qubit + 1) as U rho U^dagger."""
    n = state.n
    if not 0 <= qubit < n - 1:
        raise DimensionMismatch(f"no adjacent pair at qubit {qubit} for n={n}")
    left, right = LOCAL_DIM**qubit, LOCAL_DIM ** (n - qubit - 2)
    r = state.matrix.reshape(left, 4, right, left, 4, right)
    out = np.einsum("ab,xbyucv,ec->xayuev", unitary, r, unitary.conj(), optimize=True)
    return DensityState(n, out.reshape(state.dim, state.dim))


def local_depolarize(state: DensityState, gamma: float) -> DensityState:
    """(1 - gamma) rho + gamma tr_i(rho)/2 (x) I_i on every qubit i."""
    if gamma == 0:
        return state
    if gamma > 1:
        warnings.warn(f"local noise scale {gamma} > 1 is not completely positive", NonCPWarning)
    n, d = state.n, state.dim
    m = state.matrix
    for i in range(n):
        left, right = LOCAL_DIM**i, LOCAL_DIM ** (n - i - 1)
        r = m.reshape(left, 2, right, left, 2, right)
        reduced = r[:, 0, :, :, 0, :] + r[:, 1, :, :, 1, :]
        out = (1 - gamma) * r
        out[:, 0, :, :, 0, :] += gamma / 2 * reduced
        out[:, 1, :, :, 1, :] += gamma / 2 * reduced
        m = out.reshape(d, d)
    return DensityState(n, m)


def global_depolarize(state: DensityState, gamma: float) -> DensityState:
    """(1 - gamma) rho + gamma tr(rho)/d I."""
    d = state.dim
    return DensityState(state.n, (1 - gamma) * state.matrix + gamma * np.trace(state.matrix) / d * np.eye(d))


def run_brickwork(cfg: CircuitConfig, initial: DensityState, sample: int = 0, check_psd: bool = False) -> DensityState:
    """Evolve ``initial`` through ``cfg.k`` noisy brickwork layers."""
    if initial.n != cfg.n:
        raise DimensionMismatch(f"state has {initial.n} qubits, circuit has {cfg.n}")
    state = initial
    check_psd = check_psd or cfg.gamma > 1
    for layer in range(cfg.k):
        for gate, (i, _) in enumerate(cfg.layer_pairs(layer)):
            u = haar_unitary(4, gate_rng(cfg.seed, sample, layer, gate))
            state = apply_two_qubit(state, u, i)
        state = local_depolarize(state, cfg.gamma)
        if check_psd:
            low = state.min_eigenvalue()
            if low < -1e-10:
                warnings.warn(f"layer {layer}: minimum eigenvalue {low:.3e} < 0", NonCPWarning)
    return state


def sample_states(
    cfg: CircuitConfig, m: int, initial: Optional[DensityState] = None, workers: int = 1
) -> List[DensityState]:
    """``m`` independent circuit realizations; realization j uses sample index j."""
    if m < 1:
        raise DomainError("need at least one sample")
    initial = DensityState.zero(cfg.n) if initial is None else initial
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda j: run_brickwork(cfg, initial, j), range(m)))
    return [run_brickwork(cfg, initial, j) for j in range(m)]


def haar_mixed_state(d: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """rho = phi phi^dagger for a normalized complex Gaussian d x s matrix phi."""
    if d < 1 or s < 1:
        raise DomainError("d and s must be positive")
    phi = rng.standard_normal((d, s)) + 1j * rng.standard_normal((d, s))
    phi /= np.linalg.norm(phi)
    return phi @ phi.conj().T


def sample_expectations(spec: Spectrum, s: int, m: int, rng: np.random.Generator, batch: int = 20000) -> np.ndarray:
    """``m`` draws of tr(Pi rho) with rho Haar-random of rank ``s``.

    Works in the eigenbasis of Pi (allowed by unitary invariance):
    x = sum_i xi_i |phi_i|^2 / |phi|^2 over the rows of phi.
    """
    eig = np.repeat([float(v) for v in spec.eigenvalues], spec.multiplicities)
    d = spec.dim
    out = np.empty(m)
    for start in range(0, m, batch):
        size = min(batch, m - start)
        phi = rng.standard_normal((size, d, s)) ** 2 + rng.standard_normal((size, d, s)) ** 2
        rows = phi.sum(axis=2)
        out[start : start + size] = rows @ eig / rows.sum(axis=1)
    return out
