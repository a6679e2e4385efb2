"""Event generation: exact inverse-CDF draws and a Metropolis chain over the
collision-free sector."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .model import (
    DistributionTable,
    OutputPattern,
    binomial_table,
    colex_to_lex,
    pattern_array,
    pattern_index,
)
from .seeds import derive_seed

CHUNK_STEPS = 1 << 18


@dataclass
class McmcConfig:
    burn_in: int = 1000
    thinning: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class EventSet:
    """Collision-free events stored as lexicographic pattern indices."""

    m: int
    n: int
    indices: np.ndarray
    law_label: str = ""
    seed: int | None = None
    method: str = "exact"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        size = pattern_array(self.m, self.n).shape[0]
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= size):
            raise ValueError("event index outside the collision-free pattern space")

    def __len__(self):
        return self.indices.shape[0]

    @property
    def patterns(self) -> np.ndarray:
        return pattern_array(self.m, self.n)[self.indices]

    def events(self) -> list[OutputPattern]:
        return [OutputPattern(tuple(row), self.m) for row in self.patterns.tolist()]

    def occupations(self) -> np.ndarray:
        occ = np.zeros((len(self), self.m))
        np.put_along_axis(occ, self.patterns, 1.0, axis=1)
        return occ

    def counts(self) -> np.ndarray:
        """Per-pattern event counts over the whole lexicographic space."""
        return np.bincount(self.indices, minlength=pattern_array(self.m, self.n).shape[0])

    def frequencies(self) -> np.ndarray:
        return self.counts() / max(len(self), 1)

    def subset(self, idx) -> "EventSet":
        return EventSet(self.m, self.n, self.indices[idx], self.law_label, self.seed, self.method, dict(self.provenance))

    @classmethod
    def from_patterns(cls, patterns, m: int, **kwargs) -> "EventSet":
        patterns = list(patterns)
        n = len(patterns[0].modes if isinstance(patterns[0], OutputPattern) else patterns[0])
        idx = [pattern_index(p, m, n) for p in patterns]
        return cls(m, n, np.asarray(idx, dtype=np.int64), **kwargs)

    def metadata(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "count": len(self),
            "law": self.law_label,
            "seed": self.seed,
            "method": self.method,
            **self.provenance,
        }

    def save(self, csv_path, json_path=None) -> None:
        """``event_index,pattern`` CSV plus a JSON provenance sidecar."""
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        labels = ["-".join(map(str, row)) for row in pattern_array(self.m, self.n).tolist()]
        lines = ["event_index,pattern"]
        lines.extend(f"{i},{labels[j]}" for i, j in enumerate(self.indices.tolist()))
        csv_path.write_text("\n".join(lines) + "\n")
        json_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path, json_path=None) -> "EventSet":
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        meta = json.loads(json_path.read_text())
        m, n = int(meta["m"]), int(meta["n"])
        rows = csv_path.read_text().strip().splitlines()
        if rows[0].strip() != "event_index,pattern":
            raise ValueError(f"{csv_path}: unexpected header {rows[0]!r}")
        idx = [pattern_index([int(v) for v in line.split(",")[1].split("-")], m, n) for line in rows[1:]]
        known = {"m", "n", "count", "law", "seed", "method"}
        return cls(
            m,
            n,
            np.asarray(idx, dtype=np.int64),
            law_label=meta.get("law", ""),
            seed=meta.get("seed"),
            method=meta.get("method", "exact"),
            provenance={k: v for k, v in meta.items() if k not in known},
        )


def _check_table(table: DistributionTable) -> None:
    if len(table) == 0:
        raise ValueError("empty distribution table")
    total = float(table.probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"table is not conditioned (sums to {total})")


def sample_exact(table: DistributionTable, count: int, seed) -> EventSet:
    """I.i.d. draws by inverse CDF over the lexicographic pattern order."""
    _check_table(table)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(table.probs)
    u = rng.random(count) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(table) - 1)
    return EventSet(
        table.m,
        table.n,
        idx,
        law_label=table.law.label,
        seed=seed if isinstance(seed, int) else None,
        method="exact",
        provenance={"x_ind": table.law.x_ind, "n_cutoff": table.law.n_cutoff},
    )


def _run_chain(table: DistributionTable, count: int, burn_in: int, thinning: int, seed: int):
    m, n = table.m, table.n
    rng = np.random.default_rng(seed)
    probs = np.ascontiguousarray(table.probs, dtype=np.float64)
    out = np.empty(count, dtype=np.int64)
    state = int(rng.integers(len(table)))
    if probs[state] <= 0.0:
        state = int(np.argmax(probs))
    if m == n:
        out[:] = state
        return out, 0, 0
    occupied = pattern_array(m, n)[state]
    occ = np.array(occupied, dtype=np.int64)
    emp = np.ascontiguousarray(np.setdiff1d(np.arange(m), occupied), dtype=np.int64)
    lex = colex_to_lex(m, n)
    binom = binomial_table(m, n)
    burn_left, phase, n_out, accepted, steps = burn_in, 0, 0, 0, 0
    while n_out < count:
        needed = burn_left + (count - n_out) * thinning - phase
        size = int(min(CHUNK_STEPS, needed))
        pick_occ = rng.integers(0, n, size=size, dtype=np.int64)
        pick_emp = rng.integers(0, m - n, size=size, dtype=np.int64)
        uniforms = rng.random(size)
        state, burn_left, phase, n_out, acc = kernels.metropolis_chunk(
            probs, lex, binom, occ, emp, state, pick_occ, pick_emp, uniforms,
            burn_left, thinning, phase, out, n_out,
        )
        accepted += acc
        steps += size
    return out, accepted, steps


def sample_mcmc(table: DistributionTable, count: int, config: McmcConfig | None = None,
                chains: int = 1, threads: int = 1) -> EventSet:
    """Metropolis sampling with a symmetric single-photon mode-swap proposal.

    Each step picks one occupied and one empty mode uniformly and swaps them,
    accepting with ``min(1, p'/p)``. After ``burn_in`` steps, every
    ``thinning``-th state is kept. With ``chains > 1`` the events are split
    over independent chains seeded from ``(config.seed, chain)``; the result
    does not depend on ``threads``.
    """
    config = config or McmcConfig()
    _check_table(table)
    if count < 1:
        raise ValueError("count must be >= 1")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    sizes = [count // chains + (1 if c < count % chains else 0) for c in range(chains)]
    if chains == 1:
        seeds = [config.seed]
    else:
        seeds = [derive_seed(config.seed, "chain", c) for c in range(chains)]

    def run(c):
        return _run_chain(table, sizes[c], config.burn_in, config.thinning, seeds[c])

    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(chains)))
    else:
        results = [run(c) for c in range(chains)]
    idx = np.concatenate([r[0] for r in results])
    accepted = sum(r[1] for r in results)
    steps = sum(r[2] for r in results)
    return EventSet(
        table.m,
        table.n,
        idx,
        law_label=table.law.label,
        seed=config.seed,
        method="mcmc",
        provenance={
            "x_ind": table.law.x_ind,
            "n_cutoff": table.law.n_cutoff,
            "burn_in": config.burn_in,
            "thinning": config.thinning,
            "chains": chains,
            "acceptance_rate": accepted / steps if steps else 1.0,
        },
    )
