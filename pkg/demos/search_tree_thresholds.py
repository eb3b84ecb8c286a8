"""
Phase transitions of m-ary search trees and B-urns
==================================================

The node-occupancy urn of an m-ary search tree has a sqrt(n) central limit
theorem as long as every non-Perron eigenvalue has real part at most 1/2.
The eigenvalues solve a polynomial equation, so the scan is cheap.
"""

from urnlab import zoo
from urnlab.verify import proportion_test, scan_matrix_check, threshold_scan
from urnlab.dynamics import simulate

for row in threshold_scan("mary", range(24, 30)):
    print(f"m={row.param}  max Re/r={row.max_re_over_r:.4f}  p={row.p}"
          f"  matrix check={scan_matrix_check('mary', row.param):.4f}")

for row in threshold_scan("burn", range(57, 62)):
    print(f"B-urn m={row.param}  max Re/r={row.max_re_over_r:.4f}  p={row.p}")

###############################################################################
# For m = 3 the limit proportions are (3/5, 2/5).

batch = simulate(zoo("mary(3)"), 10**5, 100, seed=3, checkpoints=[])
print(proportion_test(batch))
