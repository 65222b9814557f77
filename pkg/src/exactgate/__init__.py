"""Exact gate synthesis over ``{local unitaries} u {V}`` with no inverse of ``V``.

Modules:

* :mod:`exactgate.unitary_core` -- unitaries, eigenphases, the distance, logs and roots
* :mod:`exactgate.bipartite` -- operator-Schmidt tools and the imprimitivity test
* :mod:`exactgate.inverse_free` -- ``U^{-1}`` as a positive power of ``U``
* :mod:`exactgate.wordlang` -- inverse-free gate words
* :mod:`exactgate.chart` -- conjugated-exponential charts and Newton inversion
* :mod:`exactgate.synthesis` -- approximate and exact synthesis
* :mod:`exactgate.cli` -- the command-line front end
"""
__version__ = "0.1.0"

from .errors import ExactGateError
from .tolerances import DEFAULT, Tolerances
from .unitary_core import Flavor, Unitary, distance

__all__ = ["DEFAULT", "ExactGateError", "Flavor", "Tolerances", "Unitary", "distance", "__version__"]
