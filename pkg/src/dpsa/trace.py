"""Per-outer-iteration run records and their CSV emission."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TraceRow:
    t: int
    consensus_rounds: int
    mean_error: float
    max_error: float
    mean_drift: float  # Frobenius distance to the lockstep centralized iterate
    max_drift: float
    p2p: tuple[int, ...]  # cumulative sends per node
    simulated_seconds: float
    wall_seconds: float


@dataclass
class RunTrace:
    """Ordered per-outer-iteration records for one estimator run.

    ``r_factors`` holds the lockstep centralized run's triangular factors
    when that reference was tracked (used by the convergence diagnostics).
    wall_seconds is real elapsed time and is excluded from the default CSV
    so emitted traces are byte-reproducible.
    """

    n_nodes: int
    rows: list[TraceRow] = field(default_factory=list)
    r_factors: list[np.ndarray] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])

    @property
    def final_mean_error(self) -> float:
        return self.rows[-1].mean_error

    @property
    def final_max_error(self) -> float:
        return self.rows[-1].max_error

    @property
    def p2p_per_node(self) -> np.ndarray:
        """Cumulative sends per node at the end of the run."""
        return np.asarray(self.rows[-1].p2p, dtype=np.int64)

    @property
    def total_p2p(self) -> int:
        return int(self.p2p_per_node.sum())

    @property
    def mean_p2p(self) -> float:
        return float(self.p2p_per_node.mean())

    @property
    def simulated_seconds(self) -> float:
        return self.rows[-1].simulated_seconds if self.rows else 0.0

    def header(self, include_wall: bool = False) -> list[str]:
        cols = ["t", "consensus_rounds", "mean_error", "max_error",
                "mean_drift", "max_drift"]
        cols += [f"p2p_{i}" for i in range(self.n_nodes)]
        cols += ["simulated_seconds"]
        if include_wall:
            cols += ["wall_seconds"]
        return cols

    def to_csv(self, path, include_wall: bool = False) -> None:
        def fmt(v: float) -> str:
            return f"{v:.17g}"

        with open(path, "w") as fh:
            fh.write(",".join(self.header(include_wall)) + "\n")
            for row in self.rows:
                cells = [str(row.t), str(row.consensus_rounds),
                         fmt(row.mean_error), fmt(row.max_error),
                         fmt(row.mean_drift), fmt(row.max_drift)]
                cells += [str(c) for c in row.p2p]
                cells += [fmt(row.simulated_seconds)]
                if include_wall:
                    cells += [fmt(row.wall_seconds)]
                fh.write(",".join(cells) + "\n")
