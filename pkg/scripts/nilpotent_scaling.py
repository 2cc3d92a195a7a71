"""Deviation of the quantum extremal from its nilpotent model on the innermost arc.

The log-log slope against x20 should approach 3.
"""

import numpy as np

from chattering.dynamics import ModelParams
from chattering.integrator import IntegratorSettings
from chattering.synthesis import nilpotent_deviation

for delta in (6.0, 10.0, 14.0):
    xs = np.geomspace(1e-5, 1e-3, 7)
    dev = np.array([nilpotent_deviation(x, ModelParams(delta), IntegratorSettings()) for x in xs])
    slope = np.polyfit(np.log(xs), np.log(dev), 1)[0]
    print(f"delta={delta:g}: slope {slope:.4f}, C = dev/x20^3 at smallest seed {dev[0] / xs[0]**3:.1f}")
