"""Periodic trains of single photons, in lab units.

Each source emits 11 Lorentzian photons (gamma/2pi = 8 MHz) every 500 ns.
With synchronized sources the central peak of the cross-port correlation is
gone while the peaks at multiples of the period stay at one. Delaying one
source halves those peaks and adds a pair at plus and minus the delay
around each of them, including around zero.
"""

import math

import numpy as np

from _plot import plt, save
from mwhom.core import TimeGrid
from mwhom.train import PulseTrainConfig, g2_train

ns = 1e-9
gamma = 2 * math.pi * 8e6
t_p = 500 * ns
grid = TimeGrid.symmetric(1250 * ns, 1 * ns)

curves = {}
for offset in (0, 50, 100):
    config = PulseTrainConfig("lorentzian", 11, t_p, gamma=gamma, delta_t=offset * ns)
    result = g2_train(config, grid)
    curves[offset] = result.series_cross.values
    c = curves[offset]
    print(f"offset {offset:3d} ns: g2(0) = {c[grid.index_of(0.0)]:.2e}, "
          f"g2(t_p) = {c[grid.index_of(t_p)]:.4f}, "
          f"g2(t_p + offset) = {c[grid.index_of(t_p + offset * ns)]:.4f}  [{result.meta['method']}]")

if plt:
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 6))
    for ax, (offset, c) in zip(axes, curves.items()):
        ax.plot(grid.points / ns, c, lw=0.8)
        ax.set_ylabel(f"offset {offset} ns")
    axes[-1].set_xlabel("delay (ns)")
    save(fig, "pulse_train.png")
