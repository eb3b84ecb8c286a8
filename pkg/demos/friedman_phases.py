"""
Three regimes of the Friedman urn
=================================

Drawing a ball of one colour adds ``alpha`` of that colour and ``beta`` of the
other.  The second eigenvalue ``alpha - beta`` decides how the composition
fluctuates around one half.
"""

import numpy as np

from urnlab import analyze, limit_law, zoo
from urnlab.limitcov import friedman_constant
from urnlab.verify import verify_clt

# Sweep alpha with beta = 1 and print the regime and the variance constant.
for alpha in range(2, 7):
    model = zoo("friedman", alpha=alpha, beta=1)
    _, spec, _ = analyze(model)
    law = limit_law(model)
    print(f"alpha={alpha}  lambda2/r={spec.ratios[1]:+.3f}  regime={spec.regime.value:11s}"
          f"  A[1,1]={law.A[0, 0]:8.4f}  closed form={friedman_constant(alpha, 1):8.4f}")

###############################################################################
# Below the line the fluctuations are of order sqrt(n).  A short Monte-Carlo
# run recovers the constant 3/20 for (alpha, beta) = (1, 2).

report = verify_clt(zoo("friedman(1,2)"), n=2000, N=2000, seed=1)
print(report.summary())

###############################################################################
# On the line alpha = 3 beta the scale picks up a log factor.

report = verify_clt(zoo("friedman(3,1)"), n=2000, N=2000, seed=2)
print(report.meta["scaling"], report.check("A_V").empirical[0, 0])

###############################################################################
# Above it the second projection has a random limit Xi, and only the residual
# after subtracting n^(lambda/r) Xi is Gaussian.  Xi is estimated at the
# horizon n^2, which shrinks the residual variance by a factor
# 1 - (n / n^2)^(2 lambda/r - 1), about 0.85 here.

report = verify_clt(zoo("friedman(5,1)"), n=300, N=1000, seed=3, horizon_cap=90000)
print("residual A[1,1]:", np.round(report.check("A_V").empirical[0, 0], 2), "target 12")
