"""
Estimating the cube constant
============================

Minimize on [0, 1] for growing N, fit E / N^(1+s) = C + b / N and compare
with the exact one-dimensional value. The same routine runs for d >= 2,
where no exact value is known; there the estimate is all there is.
"""
from rknn import calibrate_Csdk
from rknn.optimize import OptimizerConfig

for s, k in ((2.0, 2), (3.0, 1)):
    cal = calibrate_Csdk(s, 1, k, [40, 80, 160])
    print(f"d=1 s={s} k={k}: C_hat = {cal.value:.6f}, exact {cal.oracle:.6f}, error {cal.oracle_error:.2e}")

# a quick two-dimensional estimate; budget kept small on purpose
cal = calibrate_Csdk(2.0, 2, 4, [64, 144, 256], opts=OptimizerConfig(max_iters=1500))
print(f"d=2 s=2 k=4: C_hat = {cal.value:.4f} (slope {cal.slope:.3f}, residual {cal.residual:.2e})")
