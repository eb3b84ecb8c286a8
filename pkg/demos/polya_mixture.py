"""
The classical Polya urn as a Gaussian mixture
=============================================

With ``R = I`` the limit proportion ``U`` of colour 1 is uniform, and given
``U`` the fluctuations are Gaussian with variance ``U (1 - U)``.
"""

from urnlab import limit_law, simulate, zoo
from urnlab.verify import proportion_test, verify_clt

model = zoo("polya")

# Limit proportions are random: a Kolmogorov-Smirnov test against Uniform(0, 1).
batch = simulate(model, 10**4, 5000, seed=11, checkpoints=[])
print(proportion_test(batch))

# The unconditional variance averages U (1 - U) over the uniform law.
print("E[U(1-U)] =", limit_law(model, unconditional=True).A[0, 0])

# Conditionally on U the target is binomial.
for u in (0.1, 0.5, 0.9):
    print(f"U={u}: A[1,1] =", limit_law(model, V=[u, 1 - u]).A[0, 0])

###############################################################################
# Binning replicas by their estimated U shows the rise and fall.

report = verify_clt(model, n=1000, N=4000, seed=12, horizon_cap=10**5, bins=8)
for row in report.data["bins"]:
    print(f"U~{row['key_mean']:.2f}  var={row['var']:.4f}  target={row['target']:.4f}")
print(report.summary().splitlines()[0])
