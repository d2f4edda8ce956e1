"""The ratio statistic <f, X_t> / <phi0, X_t> settling on <f, phi0_hat>_m.

For the super inward OU process phi0 = 1 and phi0_hat m = N(0, 1/2), so the
fraction of mass in [-1, 1] should approach erf(1) on survival while its
spread across paths shrinks.  Pass ``--svg`` to also write trajectory plots.
"""

import math
import sys

from superlab import experiment as ex
from superlab import presets
from superlab import testfunctions as tf
from superlab.particle import SimConfig
from superlab.spectral import registry_lookup

spec = presets.inward_ou()
sd = registry_lookup(spec)
ball = tf.ball([0.0], 1.0, "ball")
cfg = SimConfig(0.02, seed=7, observation_times=(1.0, 2.0, 4.0, 6.0))
recs = ex.run_paths(spec, cfg, [ball], sd, 300)
rep = ex.run_slln(spec, cfg, [ball], sd, 300, records=recs)

print(f"target erf(1) = {math.erf(1):.5f}")
for t in cfg.observation_times:
    c = rep.cell("ball", t)
    print(f"t={t:<3g} ratio {c.ratio_mean:.4f} +- {c.ratio_se:.4f}   IQR {c.ratio_iqr:.4f}   "
          f"alive {c.n_surviving}")
print(rep.summary())

if "--svg" in sys.argv:
    ex.plot_trajectories(recs, sd, "ball", "slln_ball.svg")
    print("wrote slln_ball.svg")
