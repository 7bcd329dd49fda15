"""
Hierarchical equations of motion for open quantum systems.

A small system coupled to bosonic, fermionic or hybrid thermal baths is
propagated on a truncated hierarchy of auxiliary density operators (ADOs).
The pieces compose as::

    baths = [lorentzian_pade_fermion(d, Gamma, W, mu, kT, N, bath_id="L"), ...]
    space = HierarchySpace.from_baths(baths, m_max, n_max, I_th)
    M = build_heomls(H, baths, space, Parity.EVEN)
    ss, report = steadystate(M)

Energies are in meV and times in hbar/meV.
"""

from .bath import *  # noqa: F401,F403
from .hierarchy import *  # noqa: F401,F403
from .liouvillian import *  # noqa: F401,F403
from .solvers import *  # noqa: F401,F403
from .observables import *  # noqa: F401,F403
from .systems import *  # noqa: F401,F403
from . import bath, hierarchy, liouvillian, solvers, observables, systems, config, io, oracles  # noqa: F401

__version__ = "0.1.0"
