"""Variable branching rate through the ground-state transform.

The original model is an inward OU (c = 3) with linear coefficient
2|x|^2 + 1.  Its mean mass grows like exp(lambda_c t); the transformed
process is an inward OU with constant rate lambda_c, so the original first
moment is h(x) T^h_t(f / h)(x).
"""

import math

import numpy as np

from superlab import presets
from superlab import semigroup as sg
from superlab import testfunctions as tf

spec = presets.htransform_ou(c=3.0, c1=2.0, c2=1.0)
ht = spec.htransform
print(f"upsilon = {ht.upsilon:.5f}, lambda_c = {ht.lambda_c:.5f}, transformed drift = {ht.transformed_motion.c:.5f}")

f = tf.gaussian(1.0, 1.0)
x = np.array([[0.0], [0.5]])
for t in (0.5, 1.0, 2.0, 4.0):
    m = sg.original_mean(spec, t, f, x)
    print(f"t={t:<4g} E<f, X_t> = {m[0]:.6g}, {m[1]:.6g}   scaled by exp(-lambda_c t): "
          f"{m[0] * math.exp(-ht.lambda_c * t):.6f}, {m[1] * math.exp(-ht.lambda_c * t):.6f}")
