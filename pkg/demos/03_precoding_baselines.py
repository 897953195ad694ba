"""Multiuser MMSE precoding and the transmit-scheme baselines.

One random multipath draw, four transmitters: plain active array, fixed
couplers (reference arc), position-optimized couplers, and a fully active
array using every port.  Power is metered through the impedance model, so
all schemes burn the same transmit budget.
"""

import numpy as np

from fcarray import (
    ArrayLayout,
    DipoleModel,
    SCAConfig,
    optimize,
    sample_channels,
    transmit_power,
    uniform_placement,
)
from fcarray.precoding import active_only_state, fc_state, fully_active_state

layout = ArrayLayout(M=6, N=2)
model = DipoleModel.for_layout(layout)
K = 3
P_max = 1.0  # 30 dBm
sigma2 = P_max / (K * 10.0)  # 10 dB SNR definition P g0 / (K sigma^2)

spec = sample_channels(2024, K=K, L=15, layout=layout)
fixed = uniform_placement(layout)

st_active = active_only_state(spec, layout, model, P_max, sigma2)
st_fixed = fc_state(spec, fixed, layout, model, P_max, sigma2)
st_fully = fully_active_state(spec, layout, model, P_max, sigma2)
res = optimize(fixed, SCAConfig(), spec, layout, model, P_max, sigma2)

print(f"M={layout.M} antennas, N={layout.N} couplers, K={K} users, L=15 paths\n")
print(f"{'scheme':>16} {'sum rate (b/s/Hz)':>18} {'power check':>12}")
print(f"{'active-only':>16} {st_active.sum_rate:18.4f} "
      f"{transmit_power(st_active.U, st_active.B):12.6f}")
print(f"{'fixed-coupler':>16} {st_fixed.sum_rate:18.4f} "
      f"{transmit_power(st_fixed.U, st_fixed.B):12.6f}")
print(f"{'fc-optimized':>16} {res.trace.rates[-1]:18.4f} "
      f"{transmit_power(res.state.U, res.state.B):12.6f}")
print(f"{'fully-active':>16} {st_fully.sum_rate:18.4f} "
      f"{np.linalg.norm(st_fully.F)**2:12.6f}")

print(f"\noptimizer: {len(res.trace.rates) - 1} iterations, rate "
      f"{res.trace.rates[0]:.4f} -> {res.trace.rates[-1]:.4f}")
print(f"per-user SINRs (dB): {10 * np.log10(res.state.sinr).round(2)}")
