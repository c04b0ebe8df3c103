"""Locally-balanced Markov jump processes.

Continuous-time samplers whose jump kernel weights a base proposal gamma by a
balancing function g of the target ratio, making the target pi stationary by
construction.  The package covers the full experimental surface: the catalog
of balancing functions and their identities, exact and uniformized (thinned)
trajectory simulation, finite-state generators with spectral-gap
certificates, birth-death hitting-time analysis, Monte Carlo estimators on
the embedded chain, the small-jump Langevin limit, and non-reversible lifted
extensions under skew detailed balance.

Quick start::

    import numpy as np
    from lbjump import balancing, models, simulate

    target = models.FiniteTarget(np.array([0.2, 0.3, 0.5]))
    kernel = models.FiniteKernel(np.full((3, 3), 0.5) - 0.5 * np.eye(3))
    oracle = models.RatioOracle(target, kernel)
    g = balancing.get("barker")
    traj = simulate.run_exact(0, oracle, g, horizon=100.0,
                              rng=simulate.SeededStream(42))
    simulate.time_average(traj, lambda s: float(s))

The ``lbjump`` console script drives the bundled experiments; ``lbjump
accept`` runs the full acceptance battery.
"""

from . import (  # noqa: F401
    acceptance,
    balancing,
    diffusion,
    estimators,
    hitting,
    jumprate,
    models,
    nonrev,
    simulate,
    spectral,
)
from .balancing import BalancingSpec, builtin_catalog  # noqa: F401
from .models import (  # noqa: F401
    ContinuousTarget,
    FiniteKernel,
    FiniteTarget,
    GaussianWalk,
    LatticeTarget,
    LatticeWalk,
    RatioOracle,
)
from .simulate import JumpTrajectory, SeededStream, run_exact, run_thinning  # noqa: F401

__version__ = "0.1.0"
