"""Output patterns, collision-free enumeration and output-probability laws.

Probabilities for partially distinguishable photons are evaluated through
"interference terms": for every output pattern and every permutation order
``d`` (number of non-fixed points of sigma), the sum of
``Perm(M o conj(M[:, sigma]))`` over permutations of that order. Under a
uniform pairwise overlap ``x`` the permutation weight is ``x**d``, so

* partial(x)          = sum_d x**d * terms[d]
* approx(x, cutoff)   = sum_{d <= cutoff} x**d * terms[d]
* fully distinguishable = terms[0]

and one table of terms serves every ``x`` and every cutoff.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .linalg import as_complex_matrix

MAX_PATTERNS = 10**6
MAX_PERMUTATION_PHOTONS = 8
IMAG_TOL = 1e-10
NEGATIVE_TOL = 1e-12
CLAMP_BREACH_FRACTION = 1e-3

LAW_KINDS = ("ideal", "partial", "approx", "uniform", "fd")


class NumericalInvariantError(RuntimeError):
    """A numerical self-check failed (signals a kernel bug, not bad input)."""


@dataclass(frozen=True, order=True)
class OutputPattern:
    """Collision-free Fock state given by its ascending occupied modes."""

    modes: tuple
    m: int

    def __post_init__(self):
        modes = tuple(int(v) for v in self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise ValueError("a pattern needs at least one photon")
        if any(b <= a for a, b in zip(modes, modes[1:])):
            raise ValueError(f"modes must be strictly ascending: {modes}")
        if modes[0] < 0 or modes[-1] >= self.m:
            raise ValueError(f"modes {modes} out of range [0, {self.m})")

    @classmethod
    def from_modes(cls, modes, m: int) -> "OutputPattern":
        return cls(tuple(sorted(int(v) for v in modes)), m)

    @classmethod
    def parse(cls, label: str, m: int) -> "OutputPattern":
        return cls.from_modes([int(v) for v in label.split("-")], m)

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def label(self) -> str:
        return "-".join(str(v) for v in self.modes)

    def occupation(self) -> np.ndarray:
        occ = np.zeros(self.m)
        occ[list(self.modes)] = 1.0
        return occ

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class DistinguishabilityModel:
    """Uniform pairwise overlap ``x_ind`` between the ``n`` input photons."""

    x_ind: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.x_ind <= 1.0:
            raise ValueError(f"x_ind must lie in [0, 1], got {self.x_ind}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def overlap_matrix(self) -> np.ndarray:
        return self.x_ind + (1.0 - self.x_ind) * np.eye(self.n)

    def weight(self, sigma) -> float:
        s = self.overlap_matrix()
        return float(np.prod([s[j, k] for j, k in enumerate(sigma)]))


@dataclass(frozen=True)
class Law:
    """Output-probability law used to build a :class:`DistributionTable`."""

    kind: str
    x_ind: float | None = None
    n_cutoff: int | None = None

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown law {self.kind!r}; expected one of {LAW_KINDS}")
        if self.kind in ("partial", "approx"):
            if self.x_ind is None or not 0.0 <= self.x_ind <= 1.0:
                raise ValueError(f"{self.kind} law needs x_ind in [0, 1]")
        if self.kind == "approx" and (self.n_cutoff is None or self.n_cutoff < 0):
            raise ValueError("approx law needs n_cutoff >= 0")

    @classmethod
    def ideal(cls):
        return cls("ideal")

    @classmethod
    def partial(cls, x_ind):
        return cls("partial", float(x_ind))

    @classmethod
    def approx(cls, x_ind, n_cutoff):
        return cls("approx", float(x_ind), int(n_cutoff))

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def fully_distinguishable(cls):
        return cls("fd")

    @classmethod
    def parse(cls, text: str) -> "Law":
        """Parse ``ideal``, ``uniform``, ``fd``, ``partial:X`` or ``approx:X:CUTOFF``."""
        parts = text.strip().split(":")
        kind = parts[0].lower().replace("fully-distinguishable", "fd")
        try:
            if kind == "partial" and len(parts) == 2:
                return cls.partial(float(parts[1]))
            if kind == "approx" and len(parts) == 3:
                return cls.approx(float(parts[1]), int(parts[2]))
            if kind in ("ideal", "uniform", "fd") and len(parts) == 1:
                return cls(kind)
        except ValueError as exc:
            raise ValueError(f"bad law spec {text!r}: {exc}") from None
        raise ValueError(f"bad law spec {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "partial":
            return f"partial x={self.x_ind:g}"
        if self.kind == "approx":
            return f"approx x={self.x_ind:g} cutoff={self.n_cutoff}"
        return self.kind

    @property
    def spec(self) -> str:
        if self.kind == "partial":
            return f"partial:{self.x_ind!r}"
        if self.kind == "approx":
            return f"approx:{self.x_ind!r}:{self.n_cutoff}"
        return self.kind

    @property
    def needs_permutation_sum(self) -> bool:
        return self.kind in ("partial", "approx", "fd")


# -- enumeration ----------------------------------------------------------


def _check_mn(m: int, n: int) -> None:
    if n < 1 or m < 1:
        raise ValueError("m and n must be >= 1")
    if n > m:
        raise ValueError(f"n = {n} photons cannot be collision-free over m = {m} modes")


@functools.lru_cache(maxsize=32)
def _pattern_array(m: int, n: int) -> np.ndarray:
    _check_mn(m, n)
    if math.comb(m, n) > MAX_PATTERNS:
        raise ValueError(f"C({m},{n}) = {math.comb(m, n)} exceeds the enumeration bound {MAX_PATTERNS}")
    arr = np.array(list(itertools.combinations(range(m), n)), dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


def pattern_array(m: int, n: int) -> np.ndarray:
    """All collision-free patterns as a read-only (C(m,n), n) int array, lexicographic."""
    return _pattern_array(m, n)


def enumerate_collision_free(m: int, n: int) -> list[OutputPattern]:
    """All C(m, n) collision-free patterns in lexicographic order."""
    return [OutputPattern(tuple(row), m) for row in pattern_array(m, n).tolist()]


@functools.lru_cache(maxsize=32)
def binomial_table(m: int, n: int) -> np.ndarray:
    """``table[a, b] = C(a, b)`` for ``0 <= a <= m``, ``0 <= b <= n + 1``."""
    table = np.zeros((m + 1, n + 2), dtype=np.int64)
    for a in range(m + 1):
        for b in range(n + 2):
            table[a, b] = math.comb(a, b)
    table.setflags(write=False)
    return table


def colex_rank(modes, binom) -> int:
    return int(sum(binom[c, i + 1] for i, c in enumerate(sorted(modes))))


@functools.lru_cache(maxsize=32)
def colex_to_lex(m: int, n: int) -> np.ndarray:
    """Map from colexicographic rank to lexicographic table index."""
    patterns = pattern_array(m, n)
    binom = binomial_table(m, n)
    ranks = np.zeros(patterns.shape[0], dtype=np.int64)
    for i in range(n):
        ranks += binom[patterns[:, i], i + 1]
    out = np.empty_like(ranks)
    out[ranks] = np.arange(patterns.shape[0])
    out.setflags(write=False)
    return out


def pattern_index(pattern, m: int, n: int) -> int:
    """Lexicographic index of a pattern (OutputPattern or mode sequence)."""
    modes = pattern.modes if isinstance(pattern, OutputPattern) else tuple(pattern)
    if len(modes) != n:
        raise ValueError(f"pattern {modes} does not hold {n} photons")
    return int(colex_to_lex(m, n)[colex_rank(modes, binomial_table(m, n))])


def default_input(n: int) -> tuple:
    return tuple(range(n))


@functools.lru_cache(maxsize=16)
def permutation_orders(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All permutations of range(n) and their numbers of non-fixed points."""
    if n > MAX_PERMUTATION_PHOTONS:
        raise ValueError(
            f"the permutation sum over n! terms is limited to n <= {MAX_PERMUTATION_PHOTONS} (got n = {n})"
        )
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    orders = (perms != np.arange(n)).sum(axis=1).astype(np.int64)
    perms.setflags(write=False)
    orders.setflags(write=False)
    return perms, orders


# -- single-pattern probabilities -----------------------------------------


def _modes(p) -> tuple:
    return p.modes if isinstance(p, OutputPattern) else tuple(sorted(int(v) for v in p))


def _pair(u, input_pattern, output_pattern):
    u = as_complex_matrix(u)
    rows, cols = _modes(input_pattern), _modes(output_pattern)
    if len(rows) != len(cols):
        raise ValueError(f"photon count mismatch: {len(rows)} in, {len(cols)} out")
    m = u.shape[0]
    for modes in (rows, cols):
        if len(set(modes)) != len(modes) or min(modes) < 0 or max(modes) >= m:
            raise ValueError(f"invalid collision-free pattern {modes} for m = {m}")
    return u, np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)[None, :]


def ideal_probability(u, input_pattern, output_pattern) -> float:
    """|Perm(U[input, output])|^2 for indistinguishable photons."""
    u, rows, cols = _pair(u, input_pattern, output_pattern)
    return float(abs(kernels.batch_permanents(u, rows, cols)[0]) ** 2)


def _order_terms(u, rows, cols) -> np.ndarray:
    perms, orders = permutation_orders(rows.size)
    terms, max_imag = kernels.interference_terms(u, rows, cols, perms, orders)
    if max_imag > IMAG_TOL:
        raise NumericalInvariantError(f"imaginary residue {max_imag:.3e} exceeds {IMAG_TOL:g}")
    return terms


def partial_probability(u, input_pattern, output_pattern, model: DistinguishabilityModel) -> float:
    """Output probability with uniform pairwise photon overlap ``model.x_ind``."""
    u, rows, cols = _pair(u, input_pattern, output_pattern)
    if model.n != rows.size:
        raise ValueError(f"model is for {model.n} photons, pattern has {rows.size}")
    terms = _order_terms(u, rows, cols)[0]
    return float(terms @ np.power(model.x_ind, np.arange(rows.size + 1)))


def approx_probability(u, input_pattern, output_pattern, model: DistinguishabilityModel, n_cutoff: int) -> float:
    """Partial-distinguishability probability keeping only permutations with at
    most ``n_cutoff`` non-fixed points. May be negative; not clamped here."""
    u, rows, cols = _pair(u, input_pattern, output_pattern)
    n = rows.size
    if not 0 <= n_cutoff <= n:
        raise ValueError(f"n_cutoff must lie in [0, {n}], got {n_cutoff}")
    terms = _order_terms(u, rows, cols)[0]
    return float(terms[: n_cutoff + 1] @ np.power(model.x_ind, np.arange(n_cutoff + 1)))


# -- tables ---------------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _cached_terms(u_bytes: bytes, m: int, rows: tuple, n: int) -> np.ndarray:
    u = np.frombuffer(u_bytes, dtype=np.complex128).reshape(m, m)
    terms = _order_terms(u, np.asarray(rows, dtype=np.int64), pattern_array(m, n))
    terms.setflags(write=False)
    return terms


def interference_table(u, input_modes=None) -> np.ndarray:
    """Order-resolved interference terms for every collision-free pattern.

    Shape ``(C(m, n), n + 1)``; cached per (matrix, input).
    """
    u = np.ascontiguousarray(as_complex_matrix(u))
    n = len(input_modes) if input_modes is not None else None
    rows = tuple(sorted(input_modes)) if input_modes is not None else None
    if rows is None:
        raise ValueError("input_modes is required")
    return _cached_terms(u.tobytes(), u.shape[0], rows, n)


@dataclass
class DistributionTable:
    """Probabilities of every collision-free pattern under one law.

    ``probs`` is conditioned on the collision-free sector (sums to 1);
    ``cfs_mass`` is the unconditioned collision-free probability.
    """

    m: int
    n: int
    law: Law
    probs: np.ndarray
    cfs_mass: float
    input_modes: tuple = ()
    clamp_count: int = 0
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def patterns(self) -> np.ndarray:
        return pattern_array(self.m, self.n)

    def __len__(self):
        return self.probs.shape[0]

    def pattern_list(self) -> list[OutputPattern]:
        return enumerate_collision_free(self.m, self.n)

    def occupations(self) -> np.ndarray:
        occ = np.zeros((len(self), self.m))
        np.put_along_axis(occ, self.patterns, 1.0, axis=1)
        return occ

    def index_of(self, pattern) -> int:
        return pattern_index(pattern, self.m, self.n)

    def prob(self, pattern) -> float:
        return float(self.probs[self.index_of(pattern)])

    @property
    def unconditioned(self) -> np.ndarray:
        return self.probs * self.cfs_mass

    def metadata(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "law": self.law.kind,
            "law_spec": self.law.spec,
            "x_ind": self.law.x_ind,
            "n_cutoff": self.law.n_cutoff,
            "cfs_mass": self.cfs_mass,
            "seed": self.seed,
            "input_modes": list(self.input_modes),
            "clamp_count": self.clamp_count,
            **self.extra,
        }

    def save(self, csv_path, json_path=None) -> None:
        """Write ``pattern,prob`` CSV plus a JSON sidecar."""
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        lines = ["pattern,prob"]
        for row, p in zip(self.patterns.tolist(), self.probs.tolist()):
            lines.append(f"{'-'.join(map(str, row))},{p!r}")
        csv_path.write_text("\n".join(lines) + "\n")
        json_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path, json_path=None) -> "DistributionTable":
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        meta = json.loads(json_path.read_text())
        m, n = int(meta["m"]), int(meta["n"])
        rows = csv_path.read_text().strip().splitlines()
        if rows[0].strip() != "pattern,prob":
            raise ValueError(f"{csv_path}: unexpected header {rows[0]!r}")
        probs = np.empty(len(rows) - 1)
        for line in rows[1:]:
            label, p = line.split(",")
            probs[pattern_index([int(v) for v in label.split("-")], m, n)] = float(p)
        if probs.shape[0] != math.comb(m, n):
            raise ValueError(f"{csv_path}: expected {math.comb(m, n)} rows")
        law = Law.parse(meta["law_spec"]) if "law_spec" in meta else Law(meta["law"], meta.get("x_ind"), meta.get("n_cutoff"))
        known = {"m", "n", "law", "law_spec", "x_ind", "n_cutoff", "cfs_mass", "seed", "input_modes", "clamp_count"}
        return cls(
            m=m,
            n=n,
            law=law,
            probs=probs,
            cfs_mass=float(meta["cfs_mass"]),
            input_modes=tuple(meta.get("input_modes", ())),
            clamp_count=int(meta.get("clamp_count", 0)),
            seed=meta.get("seed"),
            extra={k: v for k, v in meta.items() if k not in known},
        )


def _condition(raw: np.ndarray, law: Law):
    raw = np.asarray(raw, dtype=np.float64)
    negative = raw < 0
    clamp_count = int(negative.sum())
    if law.kind == "approx":
        if clamp_count:
            warnings.warn(
                f"{law.label}: {clamp_count} negative truncated probabilities clamped to 0",
                RuntimeWarning,
                stacklevel=3,
            )
    else:
        worst = float(raw.min()) if raw.size else 0.0
        if worst < -NEGATIVE_TOL:
            raise NumericalInvariantError(f"{law.label}: probability {worst:.3e} below -{NEGATIVE_TOL:g}")
        if clamp_count > CLAMP_BREACH_FRACTION * raw.size:
            raise NumericalInvariantError(
                f"{law.label}: {clamp_count} of {raw.size} probabilities needed clamping"
            )
    clipped = np.where(negative, 0.0, raw)
    mass = float(clipped.sum())
    if not mass > 0.0:
        raise NumericalInvariantError(f"{law.label}: collision-free mass is {mass}")
    return clipped / mass, mass, clamp_count


def law_probabilities(terms: np.ndarray, law: Law) -> np.ndarray:
    """Unconditioned (raw) probabilities from an interference table."""
    n = terms.shape[1] - 1
    if law.kind == "fd":
        return terms[:, 0].copy()
    if law.kind == "partial":
        return terms @ np.power(law.x_ind, np.arange(n + 1))
    if law.kind == "approx":
        if law.n_cutoff > n:
            raise ValueError(f"n_cutoff {law.n_cutoff} exceeds n = {n}")
        c = law.n_cutoff
        return terms[:, : c + 1] @ np.power(law.x_ind, np.arange(c + 1))
    raise ValueError(f"{law.kind} is not an interference-term law")


def build_distribution(u, law: Law, input_modes=None, n: int | None = None, seed=None) -> DistributionTable:
    """Exhaustive table over all collision-free outputs, conditioned to sum to 1.

    ``input_modes`` defaults to ``(0, ..., n-1)``; pass either it or ``n``.
    """
    u = as_complex_matrix(u)
    m = u.shape[0]
    if input_modes is None:
        if n is None:
            raise ValueError("pass input_modes or n")
        input_modes = default_input(n)
    input_modes = tuple(sorted(int(v) for v in input_modes))
    n = len(input_modes)
    _check_mn(m, n)
    if len(set(input_modes)) != n or input_modes[-1] >= m or input_modes[0] < 0:
        raise ValueError(f"invalid input modes {input_modes} for m = {m}")
    patterns = pattern_array(m, n)

    if law.kind == "uniform":
        raw = np.full(patterns.shape[0], 1.0 / patterns.shape[0])
    elif law.kind == "ideal":
        perms = kernels.batch_permanents(u, np.asarray(input_modes, dtype=np.int64), patterns)
        raw = np.abs(perms) ** 2
    else:
        if n > MAX_PERMUTATION_PHOTONS:
            raise ValueError(f"{law.kind} law needs n <= {MAX_PERMUTATION_PHOTONS} (n! permutation sum)")
        raw = law_probabilities(interference_table(u, input_modes), law)

    if law.kind == "uniform":
        probs, mass, clamp_count = raw, 1.0, 0
    else:
        probs, mass, clamp_count = _condition(raw, law)
    return DistributionTable(
        m=m,
        n=n,
        law=law,
        probs=probs,
        cfs_mass=mass,
        input_modes=input_modes,
        clamp_count=clamp_count,
        seed=seed,
    )
