"""Mechanical beamforming: coupler positions shape the effective channel.

The couplers are passive; their currents are induced by the active element
through the position-dependent impedance coupling.  Moving a coupler changes
its excitation weight w (solved from the port network) and hence the antenna's
angular response.  This script sweeps one coupler along a line and tabulates
the weight and the per-antenna radiated-power coefficient b.
"""

import numpy as np

from fcarray import ArrayLayout, DipoleModel, build_block, mech_weights
from fcarray.precoding import power_coefficient
from fcarray.chanest import response_row

layout = ArrayLayout(M=1, N=1)
model = DipoleModel.for_layout(layout)
lam = layout.lam
q = layout.active_position(0)

print(f"{'d/lam':>6} {'|w|':>8} {'arg w (deg)':>12} {'b (ohm)':>10} "
      f"{'|b(0)|':>8} {'|b(45deg)|':>10}")
for d_wl in (0.16, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0):
    p_m = q[None, :] + np.array([[d_wl * lam, 0.0]])
    block = build_block(p_m, q, model)
    w, _ = mech_weights(block)
    b_power = power_coefficient(block, w)
    resp0 = response_row(0.0, p_m, w, 0, layout)
    resp45 = response_row(np.pi / 4, p_m, w, 0, layout)
    print(f"{d_wl:6.2f} {abs(w[0]):8.4f} {np.degrees(np.angle(w[0])):12.2f} "
          f"{b_power:10.3f} {abs(resp0):8.4f} {abs(resp45):10.4f}")

print("\nclose couplers are strongly excited (|w| up to ~0.5); beyond half a")
print("wavelength the induced current fades and the response returns to the")
print("bare active element (|b| -> 1, b -> 73.13 ohm).")
