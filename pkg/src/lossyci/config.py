"""Shared run configuration for the bound harness and the CLI."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RunConfig:
    """Tolerance ladder, seeding and solver budgets for a verification run.

    The three tolerances separate error classes: ``construction_tol`` for
    exact tensor algebra, ``identity_tol`` for information identities,
    ``solver_tol`` for optimizer-mediated comparisons.  ``feasibility_tol``
    gates which solver outputs count as certified.
    """

    construction_tol: float = 1e-12
    identity_tol: float = 1e-9
    solver_tol: float = 1e-3
    feasibility_tol: float = 1e-6
    seed: int = 0
    restarts: int = 4
    u_cardinality: int | None = None
    max_iterations: int = 10000
    output_format: str = "json"

    def __post_init__(self):
        ladder = (self.construction_tol, self.identity_tol, self.solver_tol)
        if any(t <= 0 for t in ladder) or self.feasibility_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (self.construction_tol <= self.identity_tol <= self.solver_tol):
            raise ValueError("tolerances must be ordered construction <= identity <= solver")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.output_format not in ("json", "csv"):
            raise ValueError("output_format must be json or csv")
