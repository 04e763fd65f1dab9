"""Compression distance between a pattern and its noisy copy.

A binary disk image is flipped with probability p = 0.1 and compared to
the clean version with the normalized compression distance. As the
image grows, the noise contributes ever more incompressible bits, so
the measured distance climbs toward the prediction
1 - Z(clean) / (D * H(p)) even though the underlying pattern never
changes. A distance that depends on the dimension this strongly makes a
poor similarity measure for structured data, which is the motivation
for capacity-limited descriptions.
"""

import math

from ccdae import baselines

points = baselines.noise_experiment(p=0.1,
                                    dimensions=(64**2, 128**2, 256**2, 512**2))

print("side   D        Z(s) bits   measured   predicted")
for pt in points:
    side = int(math.isqrt(pt.dimension))
    print(f"{side:4d} {pt.dimension:8d} {pt.z_s_bits:11d} "
          f"{pt.ncd:10.4f} {pt.predicted:11.4f}")

print()
same = baselines.noise_experiment(p=0.0, dimensions=(64**2, 128**2))
for pt in same:
    print(f"identical inputs, D={pt.dimension}: ncd={pt.ncd:.4f}")

print()
print(baselines.noise_experiment_csv(points), end="")
