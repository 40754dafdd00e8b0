"""Thin-film fluid-structure interaction: a reduced plate model checked against a full solver.

Modules:

* :mod:`thinfsi.params`: scaling regimes with their coefficients and rate predictions.
* :mod:`thinfsi.fields`: periodic slab fields and their CSV form.
* :mod:`thinfsi.forces`: volume forces used as test data.
* :mod:`thinfsi.reduced_solver`: the sixth-order thin-film equation.
* :mod:`thinfsi.reconstruct`: limit fields and the lifted approximation with its residuals.
* :mod:`thinfsi.analysis`: functional inequalities, the plate decomposition, error norms.
* :mod:`thinfsi.fsi_oracle`: a monolithic discretization of the full thin-domain problem.
* :mod:`thinfsi.harness`: configuration, experiments and the command line.
"""

__version__ = "0.1.0"
