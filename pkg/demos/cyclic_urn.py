"""
Complex eigenvalues: the cyclic urn
===================================

Drawing colour ``j`` adds a ball of colour ``j + 1``.  The eigenvalues are the
roots of unity, so projections are complex and the real and imaginary parts
each get their own slot in the covariance.
"""

import numpy as np

from urnlab import analyze, limit_law, zoo
from urnlab.verify import jackknife_cov, verify_clt

model = zoo("cyclic(4)")
_, spec, basis = analyze(model)
print("eigenvalues:", np.round(spec.eigenvalues, 6))

law = limit_law(model)
print("diag Sigma_V:", np.round(np.diag(law.sigma), 4))

###############################################################################
# Monte-Carlo check of the same diagonal.

report = verify_clt(model, n=2000, N=3000, seed=21)
emp, se = jackknife_cov(report.data["Z"].values)
for k, lam in enumerate(spec.eigenvalues):
    print(f"lambda={lam:+.0f}  Var Re={emp[2*k, 2*k]:.4f} (target {law.sigma[2*k, 2*k]:.4f})"
          f"  Var Im={emp[2*k+1, 2*k+1]:.4f} (target {law.sigma[2*k+1, 2*k+1]:.4f})")
