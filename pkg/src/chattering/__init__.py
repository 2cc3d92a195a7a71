"""Chattering optimal synthesis for a three-level quantum system.

Submodules
----------
dynamics    controlled vector field, adjoint flow, switching function
fuller      exact Fuller-model synthesis and the nilpotent map
integrator  Dormand-Prince 5(4) propagation of bang arcs with switching events
synthesis   seeding, shooting and switching-curve reconstruction
direct      piecewise-constant direct optimizer with discrete adjoint gradient
cli         command line front end
"""

__version__ = "0.1.0"
