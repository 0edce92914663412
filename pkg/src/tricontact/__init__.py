"""Three-state contact process: exact simulation, auxiliary chains and checks."""
from .lattice import (
    HEALTHY, PASSIVE, INFECTED, UNBOUNDED, Boundary, Configuration, DomainError,
    DynamicsParams, SiteState, Trajectory, Variant, apply_update, dist_to_healthy,
    infected_interval, neighbor_flags, rightmost_infected, run_coupled_pair, simulate,
)
from . import backend

__version__ = "0.1.0"
