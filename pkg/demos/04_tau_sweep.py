"""Reliability threshold trade-off: density falls, retained accuracy rises.

Sweeps tau over the semi-dense stage of one scene and prints the curve the
`stereopipe sweep-tau` subcommand writes as CSV.
"""
import numpy as np
from fractions import Fraction

from stereopipe import (DisparityRange, build_cost_volume,
                        extract_census_gradient, generate_scene,
                        map_disparity, reliability_filter,
                        softmax_over_disparity)


def main():
    rng = DisparityRange(0, 24)
    sc = generate_scene(seed=2, layout="fronto_layers", rng=rng,
                        height=96, width=192)
    fl = extract_census_gradient(sc.left, (9, 7), Fraction(1))
    fr = extract_census_gradient(sc.right, (9, 7), Fraction(1))
    est = map_disparity(softmax_over_disparity(
        build_cost_volume(fl, fr, rng), beta=25.0))

    print(f"{'tau':>5} {'density %':>10} {'acc<=1px %':>11}")
    for tau in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9):
        semi = reliability_filter(est, tau)
        err = np.abs(semi.disparities - sc.gt_left.disparities)
        acc = (err[semi.valid] <= 1.0).mean() if semi.valid.any() else np.nan
        print(f"{tau:>5.1f} {100 * semi.density:>10.1f} {100 * acc:>11.1f}")


if __name__ == "__main__":
    main()
