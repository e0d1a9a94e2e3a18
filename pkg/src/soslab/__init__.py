"""Solid-on-solid surfaces above a wall, Ising polymers, and the effective walk.

Subpackage map:

- ``lattice``     -- Z^2 / dual-lattice geometry, cones, translations
- ``gibbs``       -- SOS Gibbs measures: heat-bath MCMC, exact enumeration,
                     cluster weights f_U, area-tilt factors
- ``levellines``  -- level-line extraction with the northeast splitting rule
- ``polymer``     -- free/modified polymer weights, partition functions,
                     surface tension, Wulff shape, dual tilt
- ``cones``       -- cone points, irreducible decomposition, tilted measures,
                     step distribution of the effective walk
- ``walk``        -- half-space random walk: DP, harmonic functions,
                     conditioned bridges, excursion tests
- ``experiments`` -- named end-to-end experiments with CSV/manifest output
- ``cli``         -- command-line entry point

Hot numeric kernels live in ``kernels`` and are JIT-compiled with numba by
default; set ``SOSLAB_NO_NUMBA=1`` to force the pure-Python fallback.
"""

__version__ = "0.1.0"
