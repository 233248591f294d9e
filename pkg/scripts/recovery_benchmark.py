"""Recovery benchmark: fit random generated cylinders and report accuracy and timing.

    python scripts/recovery_benchmark.py --trials 50 --noise 0.01
"""

import argparse
import time

import numpy as np

from cylfit.data import GeneratorSpec, generate_cylinder_cloud
from cylfit.fitter import FitConfig, fit_cylinder
from cylfit.oracle import grid_best_axis, reduced_objective_direct


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--noise", type=float, default=0.0, help="sigma relative to the radius")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--oracle", type=int, default=0, help="also run the grid oracle at this resolution")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    cfg = FitConfig(workers=args.workers)
    angles, radius_err, times, beaten = [], [], [], 0
    for trial in range(args.trials):
        radius = float(10.0 ** rng.uniform(-1, 1))
        a_true = rng.normal(size=3)
        a_true /= np.linalg.norm(a_true)
        spec = GeneratorSpec(n=args.n, radius=radius, height=radius * rng.uniform(1, 4),
                             axis_point=tuple(rng.uniform(-5, 5, size=3)), axis_dir=tuple(a_true),
                             noise_sigma=args.noise * radius, seed=args.seed * 100_000 + trial)
        cloud = generate_cylinder_cloud(spec)
        start = time.perf_counter()
        fit = fit_cylinder(cloud, cfg)
        times.append(time.perf_counter() - start)
        angles.append(np.degrees(np.arccos(min(1.0, abs(float(fit.axis.a @ a_true))))))
        radius_err.append(abs(fit.radius - radius) / radius)
        if args.oracle:
            grid = grid_best_axis(cloud, args.oracle)
            beaten += reduced_objective_direct(cloud, fit.axis.a) <= grid.best_value

    print(f"trials            {args.trials}")
    print(f"axis angle (deg)  median {np.median(angles):.3e}  max {np.max(angles):.3e}")
    print(f"radius rel error  median {np.median(radius_err):.3e}  max {np.max(radius_err):.3e}")
    print(f"fit time (ms)     median {1e3 * np.median(times):.1f}  max {1e3 * np.max(times):.1f}")
    if args.oracle:
        print(f"fit <= oracle     {beaten}/{args.trials}")


if __name__ == "__main__":
    main()
