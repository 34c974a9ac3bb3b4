"""Generate a network drop and inspect the channel statistics.

Walks through the raw building blocks: a random topology on the square
service area, one block-fading realization on top of distance path loss and
log-normal shadowing, and the effect of link outages on the channel matrix.
"""
import numpy as np

from rsmacran.model import (apply_outage, generate_channels, generate_topology,
                            pathloss_db)

topo = generate_topology(seed=1, B=6, K=14, L=2, area_side=800.0,
                         p_max=0.631, c_max=50e6, tau=10e6,
                         noise_psd=10 ** (-19.8))
print(f"{topo.num_bs} BSs and {topo.num_users} users on a "
      f"{topo.area_side:.0f} m square, noise power "
      f"{10*np.log10(topo.noise_power*1e3):.1f} dBm")

d = topo.distances()
print(f"BS-user distances: {d.min():.0f} .. {d.max():.0f} m "
      f"(median {np.median(d):.0f} m)")
print(f"path loss at the median distance: "
      f"{pathloss_db(np.array([np.median(d)]))[0]:.1f} dB")

channels = generate_channels(topo, seed=1)
snr = np.sum(np.abs(channels.h) ** 2, axis=2) * topo.p_max[0] / topo.noise_power
print(f"full-power single-link SNR: median {10*np.log10(np.median(snr)):.1f} dB, "
      f"best {10*np.log10(snr.max()):.1f} dB")

# the aggregate vector stacks the per-BS blocks of one user
k = 0
assert np.array_equal(channels.aggregate(k),
                      channels.h[:, k, :].reshape(-1))

# a 30% outage event zeroes links but keeps the surviving fading untouched
faded = apply_outage(channels, 0.30, seed=7)
print(f"outage mask hit {faded.outage_mask.mean():.0%} of links; "
      f"{sum(faded.user_is_dead(k) for k in range(topo.num_users))} users "
      f"lost every link")
