"""Noise sweep: how the biquadratic root error compares to 2 rho times the rms distance.

As noise shrinks, sqrt(dbar2) / (2 rho rms) should approach 1.

    python scripts/noise_sweep.py --n 500 --seed 8
"""

import argparse

import numpy as np

from cylfit.data import GeneratorSpec, generate_cylinder_cloud
from cylfit.fitter import fit_cylinder


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--radius", type=float, default=1.0)
    parser.add_argument("--height", type=float, default=2.0)
    parser.add_argument("--seed", type=int, default=8)
    args = parser.parse_args()

    print(f"{'sigma/rho':>10} {'rho_fit':>12} {'rms':>12} {'sqrt(dbar2)':>12} {'ratio-1':>12}")
    for rel in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5):
        spec = GeneratorSpec(n=args.n, radius=args.radius, height=args.height, axis_dir=(1.0, -1.0, 2.0),
                             noise_sigma=rel * args.radius, seed=args.seed)
        fit = fit_cylinder(generate_cylinder_cloud(spec))
        root = np.sqrt(fit.dbar2)
        ratio = root / (2 * fit.radius * fit.rms_distance)
        print(f"{rel:10.0e} {fit.radius:12.8f} {fit.rms_distance:12.4e} {root:12.4e} {ratio - 1:12.3e}")


if __name__ == "__main__":
    main()
