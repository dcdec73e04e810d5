"""Contact process with asymptomatic and symptomatic infections.

Submodules: ``branching`` (dominating Galton-Watson process), ``lattice_sim``
(spatial simulator and exact small-lattice oracle), ``meanfield`` (ODE model),
``percolation`` (oriented percolation combinatorics), ``stats`` and ``cli``.
"""

__version__ = "0.1.0"
