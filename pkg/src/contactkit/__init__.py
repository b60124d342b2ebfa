"""Monte Carlo laboratory for the supercritical contact process on Z^d.

Subpackages: :mod:`contactkit.engine` (graphical representation in a
finite box), :mod:`contactkit.hitting` (hitting and essential hitting
times), :mod:`contactkit.stats` (conditioned batches and estimators),
:mod:`contactkit.oracle` (exact subset-chain laws) and
:mod:`contactkit.cli`.
"""

__version__ = "0.1.0"
