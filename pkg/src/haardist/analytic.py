"""Closed-form distributions and moments of Haar-random expectation values.

For an operator with spectrum ``{(xi, d_xi)}`` and an ``s``-dimensional
environment, the expectation value ``x = tr(Pi rho)`` of a Haar-random
rank-``s`` mixed state has a piecewise-polynomial density

    P(x) = sum_{xi, l} pi_{xi,l} sign(xi - x) (xi - x)^(n - 1),
    n = (d - d_xi) s + l,  0 <= l < d_xi s,

whose coefficients involve large cancellations. They are computed exactly
(rational spectra) or in adaptive multi-precision, and the resulting
polynomial pieces are resampled into double-precision Chebyshev
interpolants for fast vectorized evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import integrate, special

from .errors import DomainError, OracleTooLarge, PrecisionExhausted
from .spectra import Spectrum

DEFAULT_PRECISION = 256
MAX_PRECISION = 1 << 15
ORACLE_MAX_T = 8


# ---------------------------------------------------------------------------
# gamma-function helpers


def _is_integral(value) -> bool:
    return float(value).is_integer()


def log_gamma(value) -> float:
    return float(special.gammaln(value))


def binomial(top, k: int):
    """C(top, k) exactly for integer ``top``, via log-gamma otherwise."""
    if _is_integral(top):
        return math.comb(int(top), k)
    return math.exp(log_gamma(top + 1) - log_gamma(k + 1) - log_gamma(top - k + 1))


# ---------------------------------------------------------------------------
# projector (Beta) case


def _check_beta_args(l, d, s):
    if not 0 < l < d:
        raise DomainError(f"rank l={l} must satisfy 0 < l < d={d}")
    if s < 1:
        raise DomainError(f"environment dimension s={s} must be >= 1")


def beta_density(x, l: int, d: int, s=1):
    """Density of tr(Pi rho) for a rank-l projector in dimension d.

    ``Gamma(ds) / (Gamma(ls) Gamma((d-l)s)) x^(ls-1) (1-x)^((d-l)s-1)``,
    evaluated through log-gamma. ``s`` may be real.
    """
    _check_beta_args(l, d, s)
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise DomainError("x must lie in [0, 1]")
    out = _beta_pdf(arr, l * s, (d - l) * s)
    return float(out) if out.ndim == 0 else out


def _beta_pdf(u, a, b):
    u = np.asarray(u, dtype=float)
    log_norm = log_gamma(a + b) - log_gamma(a) - log_gamma(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = log_norm + special.xlogy(a - 1, u) + special.xlog1py(b - 1, -u)
    out = np.exp(logp)
    return np.where((u < 0) | (u > 1), 0.0, out)


def beta_moment(t: int, l: int, d: int, s=1):
    """t-th moment Gamma(ds) Gamma(ls+t) / (Gamma(ls) Gamma(ds+t)).

    Exact (a Fraction) for integer ``s``; float otherwise.
    """
    if t < 0:
        raise DomainError("moment order must be non-negative")
    if _is_integral(s):
        a, n = l * int(s), d * int(s)
        out = Fraction(1)
        for j in range(t):
            out *= Fraction(a + j, n + j)
        return out
    a, n = l * s, d * s
    return math.exp(log_gamma(n) + log_gamma(a + t) - log_gamma(a) - log_gamma(n + t))


# ---------------------------------------------------------------------------
# coefficient arithmetic


def _series_coefficients(factors, order: int):
    """Coefficients [x^0..x^order] of prod_j c_j (1 - x y_j)^(-a_j).

    ``factors`` is a sequence of (c_j, y_j, a_j). Expanding each factor as
    sum_l C(a_j + l - 1, l) y_j^l x^l and convolving is the same sum as the
    constrained-partition sum over {l_j : sum l_j = L}.
    """
    result = [1] + [0] * order
    for c, y, a in factors:
        term = [math.comb(a + l - 1, l) * y**l for l in range(order + 1)]
        conv = [0] * (order + 1)
        for i, ri in enumerate(result):
            if ri == 0:
                continue
            for j in range(order + 1 - i):
                conv[i + j] += ri * term[j]
        result = [c * v for v in conv]
    return result


def partition_sum(values, weights, xi_index: int, total: int, numerator: Callable):
    """Brute-force constrained-partition sum, used to cross-check the series.

    Sums over tuples {l_z : z != xi, sum l_z = total} of
    prod_z C(a_z + l_z - 1, l_z) numerator(z, l_z) / (xi - z)^(a_z + l_z).
    """
    xi = values[xi_index]
    others = [(v, a) for j, (v, a) in enumerate(zip(values, weights)) if j != xi_index]

    def compositions(remaining, slots):
        if slots == 1:
            yield (remaining,)
            return
        for l in range(remaining + 1):
            for rest in compositions(remaining - l, slots - 1):
                yield (l,) + rest

    if not others:
        return 1 if total == 0 else 0
    acc = 0
    for combo in compositions(total, len(others)):
        prod = 1
        for (z, a), l in zip(others, combo):
            prod *= math.comb(a + l - 1, l) * numerator(z, l) / (xi - z) ** (a + l)
        acc += prod
    return acc


def _arith_values(spec: Spectrum, exact: bool):
    if exact:
        return list(spec.eigenvalues)
    return [mpmath.mpf(v) if not isinstance(v, Fraction) else _mp(v) for v in spec.eigenvalues]


def _mp(value):
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    return mpmath.mpf(value)


def _density_coefficients(values, weights):
    """Table of (xi_index, l, n, pi) for integer weights a = d_xi * s."""
    total = sum(weights)
    table = []
    for j, (xi, a) in enumerate(zip(values, weights)):
        factors = [
            (1 / (xi - z) ** b, 1 / (xi - z), b)
            for k, (z, b) in enumerate(zip(values, weights))
            if k != j
        ]
        series = _series_coefficients(factors, a - 1)
        for l in range(a):
            n = total - a + l
            pref = Fraction(math.factorial(total - 1), 2 * math.factorial(a - l - 1) * math.factorial(n - 1))
            if isinstance(xi, Fraction):
                pi = (-1) ** l * pref * series[l]
            else:
                pi = (-1) ** l * _mp(pref) * series[l]
            table.append((j, l, n, pi))
    return table


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Coefficient:
    eigenvalue: object
    l: int
    power: int
    value: object


@dataclass(eq=False)
class AnalyticDistribution:
    """Density/CDF of tr(Pi rho) for a spectrum and environment dimension.

    ``kind`` is ``"delta"`` (one eigenvalue), ``"beta"`` (two eigenvalues,
    real ``s`` allowed) or ``"poly"`` (three or more, integer ``s``).
    Vectorized evaluation goes through :meth:`pdf` and :meth:`cdf`, which
    return 0 / clamp outside the support.
    """

    spectrum: Spectrum
    s: float
    kind: str
    coefficients: Tuple[Coefficient, ...] = ()
    precision: int = 0
    _breaks: np.ndarray = field(default=None, repr=False)
    _pdf_pieces: list = field(default=None, repr=False)
    _cdf_pieces: list = field(default=None, repr=False)

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.spectrum.lowest), float(self.spectrum.highest)

    @property
    def lower(self) -> float:
        return self.domain[0]

    @property
    def upper(self) -> float:
        return self.domain[1]

    # -- beta parameters for the two-eigenvalue case
    @property
    def beta_params(self) -> Tuple[float, float]:
        (_, d_lo), (_, d_hi) = self.spectrum.entries
        return d_hi * self.s, d_lo * self.s

    def pdf(self, x):
        arr = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if self.kind == "delta":
            out = np.where(arr == hi, np.inf, 0.0)
        elif self.kind == "beta":
            a, b = self.beta_params
            out = _beta_pdf((arr - lo) / (hi - lo), a, b) / (hi - lo)
        else:
            out = self._piecewise(arr, self._pdf_pieces)
            # interpolation noise can dip a hair below zero near simple zeros
            out = np.where((arr < lo) | (arr > hi), 0.0, np.maximum(out, 0.0))
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if self.kind == "delta":
            out = np.where(arr >= hi, 1.0, 0.0)
        elif self.kind == "beta":
            a, b = self.beta_params
            u = np.clip((arr - lo) / (hi - lo), 0.0, 1.0)
            out = special.betainc(a, b, u)
        else:
            out = self._piecewise(np.clip(arr, lo, hi), self._cdf_pieces)
            out = np.where(arr <= lo, 0.0, np.where(arr >= hi, 1.0, out))
            out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def _piecewise(self, arr, pieces):
        flat = arr.reshape(-1)
        idx = np.clip(np.searchsorted(self._breaks, flat, side="right") - 1, 0, len(pieces) - 1)
        out = np.empty_like(flat)
        for k, piece in enumerate(pieces):
            mask = idx == k
            if mask.any():
                out[mask] = piece(flat[mask])
        return out.reshape(arr.shape)

    def exact_density(self, x) -> float:
        """Density from the coefficient table in working precision (slow)."""
        return float(self._eval_mp(x, cumulative=False))

    def exact_cdf(self, x) -> float:
        return float(self._eval_mp(x, cumulative=True))

    def _eval_mp(self, x, cumulative):
        if self.kind != "poly":
            raise ValueError("coefficient evaluation only applies to three or more eigenvalues")
        with mpmath.workprec(self.precision):
            return _eval_terms(self.coefficients, _mp(Fraction(x) if isinstance(x, float) else x),
                               _mp(self.spectrum.lowest), cumulative)

    def to_json(self) -> dict:
        digits = max(20, int(self.precision * math.log10(2))) if self.precision else 20
        with mpmath.workprec(max(self.precision, 64)):
            coeffs = [
                {
                    "eigenvalue": _fmt(c.eigenvalue, digits),
                    "l": c.l,
                    "power": c.power,
                    "pi": _fmt(c.value, digits),
                }
                for c in self.coefficients
            ]
        return {
            "spectrum": self.spectrum.to_json(),
            "s": self.s,
            "kind": self.kind,
            "domain": list(self.domain),
            "precision_bits": self.precision,
            "coefficients": coeffs,
        }


def _fmt(value, digits):
    return mpmath.nstr(_mp(value), digits, strip_zeros=False) if not isinstance(value, int) else str(value)


def _eval_terms(coefficients, x, sigma, cumulative):
    acc = mpmath.mpf(0)
    for c in coefficients:
        xi = _mp(c.eigenvalue)
        diff = xi - x
        sgn = mpmath.sign(diff)
        pi = _mp(c.value)
        if cumulative:
            acc += pi / c.power * (-sgn * diff**c.power + (xi - sigma) ** c.power)
        else:
            acc += pi * sgn * diff ** (c.power - 1)
    return acc


def _magnitude_bits(coefficients, width) -> float:
    """log2 of sum |pi| max(width, 1)^(n) -- the scale of summands before cancellation."""
    width = max(_mp(width), mpmath.mpf(1))
    total = mpmath.mpf(0)
    for c in coefficients:
        total += abs(_mp(c.value)) * width ** c.power
    return float(mpmath.log(total, 2)) if total > 0 else 0.0


def build_distribution(
    spec: Spectrum, s=1, precision: int = DEFAULT_PRECISION, method: str = "auto"
) -> AnalyticDistribution:
    """Analytic distribution of tr(Pi rho) for Haar-random rank-s states.

    One eigenvalue gives an atom, two a scaled Beta law; three or more use
    the signed power-sum coefficients. ``method="poly"`` forces the
    coefficient path for two eigenvalues too (integer ``s`` only).
    """
    if s < 1:
        raise DomainError(f"environment dimension s={s} must be >= 1")
    if method not in ("auto", "poly"):
        raise ValueError(f"unknown method {method!r}")
    if spec.num_distinct == 1:
        return AnalyticDistribution(spec, s, "delta")
    if spec.num_distinct == 2 and method == "auto":
        return AnalyticDistribution(spec, s, "beta")
    if not _is_integral(s):
        raise DomainError("three or more distinct eigenvalues need an integer environment dimension")
    s = int(s)
    weights = [m * s for m in spec.multiplicities]
    exact = spec.is_exact

    prec = precision
    while True:
        with mpmath.workprec(prec):
            values = _arith_values(spec, exact)
            table = _density_coefficients(values, weights)
            coeffs = tuple(
                Coefficient(spec.eigenvalues[j], l, n, pi) for j, l, n, pi in table
            )
            width = spec.highest - spec.lowest
            need = int(_magnitude_bits(coeffs, width)) + 96
        if exact or need <= prec:
            break
        if need > MAX_PRECISION:
            raise PrecisionExhausted(f"needs {need} bits of precision (cap {MAX_PRECISION})")
        prec = need + 64
    work = max(prec, need)
    dist = AnalyticDistribution(spec, s, "poly", coeffs, work)
    _attach_interpolants(dist)

    with mpmath.workprec(work):
        total = _eval_terms(coeffs, _mp(spec.highest), _mp(spec.lowest), cumulative=True)
    if abs(total - 1) > 1e-6:
        raise PrecisionExhausted(f"CDF at the upper edge is {mpmath.nstr(total, 10)}, not 1")
    mass = sum(float(p.integ(lbnd=p.domain[0])(p.domain[1])) for p in dist._pdf_pieces)
    if abs(mass - 1) > 1e-6:
        raise PrecisionExhausted(f"density integrates to {mass}, not 1")
    return dist


def _attach_interpolants(dist: AnalyticDistribution) -> None:
    spec = dist.spectrum
    breaks = np.array([float(v) for v in spec.eigenvalues])
    degree = sum(m * dist.s for m in spec.multiplicities)  # >= polynomial degree + 1
    pdf_pieces, cdf_pieces = [], []
    with mpmath.workprec(dist.precision):
        sigma = _mp(spec.lowest)
        vals = spec.eigenvalues
        for a, b in zip(vals[:-1], vals[1:]):
            lo, hi = _mp(a), _mp(b)
            # first-kind Chebyshev nodes avoid the eigenvalue endpoints
            k = np.arange(degree + 1)
            nodes = [mpmath.cos(mpmath.pi * (2 * j + 1) / (2 * (degree + 1))) for j in k]
            xs = [(lo + hi) / 2 + (hi - lo) / 2 * t for t in nodes]
            pdf_vals = [float(_eval_terms(dist.coefficients, x, sigma, False)) for x in xs]
            cdf_vals = [float(_eval_terms(dist.coefficients, x, sigma, True)) for x in xs]
            unit = np.array([float(t) for t in nodes])
            domain = [float(a), float(b)]
            pdf_pieces.append(cheb.Chebyshev(_cheb_fit(unit, pdf_vals, degree), domain=domain))
            cdf_pieces.append(cheb.Chebyshev(_cheb_fit(unit, cdf_vals, degree), domain=domain))
    dist._breaks = breaks
    dist._pdf_pieces = pdf_pieces
    dist._cdf_pieces = cdf_pieces


def _cheb_fit(nodes, values, degree):
    # discrete orthogonality at first-kind nodes gives the coefficients directly
    values = np.asarray(values)
    n = degree + 1
    theta = np.arccos(nodes)
    coeffs = (2.0 / n) * np.cos(np.outer(np.arange(n), theta)) @ values
    coeffs[0] /= 2
    return coeffs


def _check_domain(dist: AnalyticDistribution, x: float) -> None:
    lo, hi = dist.domain
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if not lo - slack <= x <= hi + slack:
        raise DomainError(f"x={x} outside the support [{lo}, {hi}]")


def density(dist: AnalyticDistribution, x: float) -> float:
    """Density at a single point; +inf marks the atom of a one-eigenvalue spectrum."""
    _check_domain(dist, x)
    return dist.pdf(min(max(x, dist.lower), dist.upper))


def cdf(dist: AnalyticDistribution, x: float) -> float:
    _check_domain(dist, x)
    lo, hi = dist.domain
    if x <= lo and dist.kind != "delta":
        return 0.0
    if x >= hi:
        return 1.0
    return dist.cdf(x)


def shifted_scaled_density(dist: AnalyticDistribution, x: float, shift, scale) -> float:
    """Density of ``scale * X + shift`` at ``x`` where X follows ``dist``."""
    if scale <= 0:
        raise DomainError("scale must be positive")
    u = (x - float(shift)) / float(scale)
    return density(dist, u) / float(scale)


@dataclass
class AffineDistribution:
    """Law of ``scale * X + shift`` for X ~ ``base`` (vectorized, zero outside support)."""

    base: AnalyticDistribution
    shift: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError("scale must be positive")
        self.shift = float(self.shift)
        self.scale = float(self.scale)

    @classmethod
    def depolarized(cls, base: AnalyticDistribution, gamma: float) -> "AffineDistribution":
        return cls(base, float(gamma) * float(base.spectrum.mean()), 1 - float(gamma))

    @property
    def domain(self) -> Tuple[float, float]:
        lo, hi = self.base.domain
        return self.scale * lo + self.shift, self.scale * hi + self.shift

    def pdf(self, x):
        u = (np.asarray(x, dtype=float) - self.shift) / self.scale
        return self.base.pdf(u) / self.scale

    def cdf(self, x):
        u = (np.asarray(x, dtype=float) - self.shift) / self.scale
        return self.base.cdf(u)


def integrate_density(dist, weight: Optional[Callable] = None) -> float:
    """Adaptive quadrature of pdf (times ``weight``) with breakpoints at eigenvalues."""
    lo, hi = dist.domain
    spec = dist.base.spectrum if isinstance(dist, AffineDistribution) else dist.spectrum
    if isinstance(dist, AffineDistribution):
        points = [dist.scale * float(v) + dist.shift for v in spec.eigenvalues]
    else:
        points = [float(v) for v in spec.eigenvalues]
    inner = [p for p in points if lo < p < hi]
    f = (lambda x: dist.pdf(x)) if weight is None else (lambda x: dist.pdf(x) * weight(x))
    val, _ = integrate.quad(f, lo, hi, points=inner or None, limit=500, epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentVector:
    """Moments x_1..x_T; ``vec[0]`` is 1 by convention."""

    spectrum: Spectrum
    s: float
    values: Tuple[object, ...]

    def __getitem__(self, t: int):
        if t == 0:
            return 1
        return self.values[t - 1]

    def __len__(self):
        return len(self.values)

    def as_floats(self) -> List[float]:
        return [float(v) for v in self.values]


def _symmetric_dimension(n, t):
    """C(n + t - 1, t): dimension of the t-fold symmetric subspace."""
    if _is_integral(n):
        return math.comb(int(n) + t - 1, t)
    return binomial(n + t - 1, t)


def moments_newton(spec: Spectrum, s=1, t_max: int = 6) -> MomentVector:
    """Moments via power sums and Newton's identities.

    p_k = sum d_xi s xi^k; k h_k = sum_{i=1..k} p_i h_{k-i};
    x_t = h_t / C(ds + t - 1, t).
    """
    if t_max < 1:
        raise DomainError("t_max must be >= 1")
    exact = spec.is_exact and _is_integral(s)
    if exact:
        s = int(s)
        vals = spec.eigenvalues
    else:
        vals = [float(v) for v in spec.eigenvalues]
    power = [sum(m * s * v**k for v, m in zip(vals, spec.multiplicities)) for k in range(t_max + 1)]
    h = [Fraction(1) if exact else 1.0]
    for k in range(1, t_max + 1):
        acc = sum(power[i] * h[k - i] for i in range(1, k + 1))
        h.append(acc / k)
    n = spec.dim * s
    out = tuple(h[t] / _symmetric_dimension(n, t) for t in range(1, t_max + 1))
    return MomentVector(spec, s, out)


def moments_closed_form(spec: Spectrum, s: int = 1, t_max: int = 6, precision: int = DEFAULT_PRECISION) -> MomentVector:
    """Moments from the partial-fraction coefficients chi_{l,t}.

    x_t = sum_{xi != 0} sum_l chi_{l,t} xi^t with
    chi_{l,t} = (-1)^l Gamma(ds) Gamma(a - l + t) / (Gamma(a - l) Gamma(ds + t))
                * [y^l] prod_{z != xi} (xi / (xi - z))^{a_z} (1 - y z / (xi - z))^{-a_z}
    where a = d_xi s.
    """
    if t_max < 1:
        raise DomainError("t_max must be >= 1")
    if not _is_integral(s):
        raise DomainError("closed-form moments need an integer environment dimension")
    s = int(s)
    exact = spec.is_exact
    weights = [m * s for m in spec.multiplicities]
    n_total = sum(weights)
    with mpmath.workprec(precision):
        values = _arith_values(spec, exact)
        one = Fraction(1) if exact else mpmath.mpf(1)
        chi_tables = []
        for j, (xi, a) in enumerate(zip(values, weights)):
            if xi == 0:
                continue
            factors = [
                ((xi / (xi - z)) ** b, z / (xi - z), b)
                for k, (z, b) in enumerate(zip(values, weights))
                if k != j
            ]
            series = _series_coefficients(factors, a - 1)
            chi_tables.append((xi, a, series))
        out = []
        for t in range(1, t_max + 1):
            acc = 0 * one
            for xi, a, series in chi_tables:
                for l in range(a):
                    ratio = Fraction(
                        math.factorial(n_total - 1) * math.factorial(a - l + t - 1),
                        math.factorial(a - l - 1) * math.factorial(n_total + t - 1),
                    )
                    chi = (-1) ** l * (ratio if exact else _mp(ratio)) * series[l]
                    acc += chi * xi**t
            out.append(acc if exact else float(acc))
    return MomentVector(spec, s, tuple(out))


def integer_partitions(t: int):
    """Yield partitions of t as dicts {part: count}."""

    def rec(remaining, largest):
        if remaining == 0:
            yield {}
            return
        for part in range(min(remaining, largest), 0, -1):
            for rest in rec(remaining - part, part):
                out = dict(rest)
                out[part] = out.get(part, 0) + 1
                yield out

    yield from rec(t, t)


def moments_permutation_oracle(spec: Spectrum, s: int = 1, t: int = 2):
    """t-th moment by summing over cycle types of the symmetric group.

    xi_t = sum_{partitions {l_k} of t} (1/l!) multinomial(l; {l_k}) prod_k (zeta_k / k)^{l_k},
    with l = sum l_k cycles and zeta_k = tr((Pi (x) I_s)^k), normalized by C(ds+t-1, t).
    """
    if t > ORACLE_MAX_T:
        raise OracleTooLarge(f"permutation oracle supports t <= {ORACLE_MAX_T}, got {t}")
    if t == 0:
        return Fraction(1)
    exact = spec.is_exact and _is_integral(s)
    vals = spec.eigenvalues if exact else [float(v) for v in spec.eigenvalues]
    zeta = {k: sum(m * s * v**k for v, m in zip(vals, spec.multiplicities)) for k in range(1, t + 1)}
    total = Fraction(0) if exact else 0.0
    for part in integer_partitions(t):
        cycles = sum(part.values())
        multinom = math.factorial(cycles)
        for count in part.values():
            multinom //= math.factorial(count)
        term = Fraction(multinom, math.factorial(cycles)) if exact else multinom / math.factorial(cycles)
        for k, count in part.items():
            term = term * (zeta[k] / k) ** count
        total += term
    return total / _symmetric_dimension(spec.dim * s, t)
