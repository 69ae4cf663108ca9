"""Numerical laboratory for a 1D barrier with an adiabatically driven delta well.

Layers, bottom up:

* :mod:`resonlab.model`       parameters, input profiles, assumption checks
* :mod:`resonlab.greens`      branch functions and closed-form Green's functions
* :mod:`resonlab.spectra`     bare spectrum, resonance solver, trajectories
* :mod:`resonlab.scattering`  incoming states, couplings, window integrals
* :mod:`resonlab.reduced`     reduced charge model a + J1 + J2
* :mod:`resonlab.propagator`  grid Hamiltonian, Crank-Nicolson runs, observable
* :mod:`resonlab.cli`         scenario files and command-line front end
"""

__version__ = "0.1.0"
