"""Two continuously driven emitters.

Resonance fluorescence is antibunched, so each port alone shows g2(0) = 0.
When two such sources interfere, a frequency difference between them appears
in the cross-port correlation as a beat at that frequency, and rotating one
polarization interpolates between full and no interference as cos^2.
"""

import math

import numpy as np

from _plot import plt, save
from mwhom.bloch import TlsParams, coherent_fraction, g2_continuous_output, g2_polarized_output, g2_tls_closed

for gamma_p, omega in ((0.0, 0.1), (0.0, 2.0), (2.0, 0.5)):
    p = TlsParams(1.0, gamma_p, omega)
    _, g2 = g2_tls_closed(p, np.array([0.0, 1.0, 50.0]))
    print(f"dephasing {gamma_p:3.1f}, Rabi {omega:3.1f}: single-source g2(0, 1, 50) = "
          f"{g2[0]:.1e}, {g2[1]:.3f}, {g2[2]:.6f};  coherent fraction {coherent_fraction(p):.3f}")

p = TlsParams(1.0, 0.0, 0.5)
tau = np.linspace(0, 4, 2001)
beats = {d: g2_continuous_output(p, p, d, tau) for d in (0.0, 10.0)}
out = beats[10.0]
minima = tau[1:-1][(out.cross_norm[1:-1] < out.cross_norm[:-2]) & (out.cross_norm[1:-1] < out.cross_norm[2:])]
print(f"\ndetuning 10 gamma1: beat minima spaced {np.diff(minima[:3]).round(4)} vs 2pi/10 = {2 * math.pi / 10:.4f}")

print("\nphi/pi   cross-port g2(0)")
for phi in np.linspace(0, math.pi / 2, 5):
    print(f"{phi / math.pi:6.3f}   {g2_polarized_output(p, phi, np.array([0.0])).cross_norm[0]:.4f}")

if plt:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
    for d, o in beats.items():
        ax1.plot(tau, o.cross_norm, label=f"detuning {d:g}")
    ax1.set(xlabel="delay x gamma1", ylabel="normalized cross-port g2")
    ax1.legend()
    for phi in (0, math.pi / 4, math.pi / 2):
        ax2.plot(tau, g2_polarized_output(p, phi, tau).cross_norm, label=f"phi = {phi / math.pi:g} pi")
    ax2.set(xlabel="delay x gamma1")
    ax2.legend()
    save(fig, "continuous.png")
