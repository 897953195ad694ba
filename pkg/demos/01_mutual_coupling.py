"""Mutual impedance between thin half-wave dipoles.

Two parallel side-by-side dipoles couple through their near fields; the
closed-form induced-EMF expressions give the complex mutual impedance as a
function of center spacing.  This script prints the classic curve and shows
how fast coupling decays, which is why coupler repositioning only pays off
within a fraction of a wavelength of the active element.
"""

import numpy as np

from fcarray import ArrayLayout, DipoleModel, mutual_impedance, sine_cosine_integrals

layout = ArrayLayout(M=1, N=1)
model = DipoleModel.for_layout(layout)
lam = layout.lam

print(f"carrier 7 GHz, wavelength {lam * 1e3:.2f} mm, half-wave dipoles")
print(f"self impedance {model.self_impedance:.2f} ohm, "
      f"load {model.load_impedance:.2f} ohm\n")

print(f"{'d/lam':>6} {'Re Z21 (ohm)':>14} {'Im Z21 (ohm)':>14} {'|Z21|':>10}")
for d_wl in (0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 5.0, 20.0):
    z = mutual_impedance(d_wl * lam, model)
    print(f"{d_wl:6.2f} {z.real:14.3f} {z.imag:14.3f} {abs(z):10.3f}")

# the classic sanity anchor: side-by-side half-wave dipoles at lambda/2
z_half = mutual_impedance(0.5 * lam, model)
print(f"\nat d = lambda/2: {z_half:.2f} ohm (textbook value is about -12.5-29.9j)")

si, ci = sine_cosine_integrals(np.pi)
print(f"Si(pi) = {si:.10f} (Gibbs constant / pi), Ci(pi) = {ci:.10f}")
