"""Two interpolants onto the edge space, and why both are shipped.

The canonical interpolant takes trace integrals along edges.  It commutes
with the exterior derivative (D I u = I du), which is the property that
transfers the continuous de Rham structure onto the mesh, but it needs
edge traces to be single-valued: a field whose tangential part jumps has
no canonical dofs.

The patch interpolant projects onto the edge space over the cells meeting
each edge and then takes the canonical dof of that local projection.  It
asks only for cellwise integrability, it is idempotent on discrete fields,
and each dof depends on nothing outside its patch, at the price of an
O(h) commuting residual on non-discrete data.

The gallery prints both residuals for the smooth catalog, then feeds in a
tangentially continuous field whose normal component jumps across a mesh
plane: the canonical path refuses it, the patch path produces a finite
first-order approximation.
"""

import numpy as np

from feclab.approximation import commuting_residual, convergence_report
from feclab.errors import ConfigError
from feclab.fields import (broken_torus_field, pullback_form,
                           torus_commuting_catalog)
from feclab.geometry import identity_theta, metric_catalog
from feclab.mesh import build_level

cx = build_level("torus3", 2)
metric = metric_catalog(cx, "flat")
theta = identity_theta(cx)

print("commuting residual ||D I(u) - I(du)|| on the smooth catalog")
print(f"{'field':>16} {'degree':>6} {'canonical':>11} {'patch':>9}")
for form in torus_commuting_catalog():
    if form.degree >= cx.dim:
        continue
    field = pullback_form(theta, form)
    canonical = commuting_residual(cx, field)
    patch = (commuting_residual(cx, field, "quasi", metric)
             if form.degree == 1 else float("nan"))
    print(f"{form.name:>16} {form.degree:>6} {canonical:>11.2e} "
          f"{patch:>9.2e}")

print()
print("normally jumping field, tangentially continuous across cells")


def jumping(complex):
    return pullback_form(identity_theta(complex), broken_torus_field(),
                         tag="tangentially-continuous")


try:
    convergence_report("torus3", "sines", 1, "canonical",
                       field_factory=jumping)
except ConfigError as exc:
    print(f"  canonical: refused ({exc})")

report = convergence_report("torus3", "sines", 3, "quasi",
                            field_factory=jumping)
errors = [row.err_l2 for row in report.rows]
rates = np.log2(np.array(errors[:-1]) / errors[1:])
print(f"  patch L2 errors: {', '.join(f'{e:.5f}' for e in errors)}")
print(f"  patch L2 rates:  {', '.join(f'{r:.3f}' for r in rates)}")
