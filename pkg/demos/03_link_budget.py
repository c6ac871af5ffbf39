"""Walk through the link budget term by term.

Free-space numbers at the default geometry: a 23 dBm transmitter at 60 GHz
(5 mm wavelength) five meters from the receiver, 8 dBi on both ends when
aligned, and what misalignment costs.
"""

import math

import numpy as np

from wirebeam.channel import (ArrayConfig, BeamOrientation, ChannelConfig,
                              aod_geometry, array_factor, element_gain,
                              received_power)

cfg = ChannelConfig(rx_position=[0.0, 5.0, 0.0])
array = ArrayConfig()
tx = np.zeros(3)
aligned = BeamOrientation(math.pi / 2, math.pi / 2)

path_loss = 20.0 * math.log10(4.0 * math.pi * 5.0 / cfg.wavelength)
print("free-space budget at r = 5 m, perfect boresight:")
print(f"  transmit power      {cfg.tx_power_dbm:+7.2f} dBm")
print(f"  transmit gain       {element_gain(0, 0):+7.2f} dBi (element) "
      f"{array_factor(0, 0, aligned, array, cfg.wavelength):+.2f} dB (array)")
print(f"  receive gain        {cfg.rx_gain_dbi:+7.2f} dBi")
print(f"  path loss           {-path_loss:+7.2f} dB")
print(f"  received power      {received_power(tx, aligned, cfg, array):+7.2f} dBm\n")

print("what steering error costs (zenith offsets):")
print("  error    received power   drop")
p0 = received_power(tx, aligned, cfg, array)
for deg in (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 3.5, 5.0):
    beam = BeamOrientation(aligned.theta_s + math.radians(deg), aligned.phi_s)
    p = received_power(tx, beam, cfg, array)
    print(f"  {deg:4.1f}deg  {p:10.2f} dBm  {p - p0:7.2f} dB")

geo = aod_geometry(tx, cfg, aligned)
print(f"\ndeparture geometry at boresight: range {geo.range_m:.2f} m, "
      f"relative angles ({geo.theta_aod:.1e}, {geo.phi_aod:.1e}) rad")
print("the 1-degree refinement grid sits well inside the ~3.2 deg vertical HPBW,")
print("so a correctly steered beam loses only fractions of a dB to quantization.")
