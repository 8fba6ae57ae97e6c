"""How the mixture-weighting scheme turns sample costs into weights.

Each sample's weight s minimises  s * l - zeta * ln(s + zeta / lambda)  on
[0, 1]. Costs below zeta*lambda/(zeta+lambda) get weight 1 and costs at or
above lambda get weight 0. In between the weight decays as zeta/l - zeta/lambda.

The script prints that curve, then replays the quantile schedule used during
training, which raises lambda so that a growing share of samples is admitted.

Run:  python demos/self_paced_weights.py
"""
import numpy as np

from bzscr import PaceParams, optimal_s
from bzscr.selection import anneal


def main():
    pace = PaceParams(lam=2.0, zeta=0.5, mode="geometric")
    easy = pace.zeta * pace.lam / (pace.zeta + pace.lam)
    print(f"lambda = {pace.lam}, zeta = {pace.zeta}: full weight below l = {easy:.2f}, "
          f"none from l = {pace.lam:.2f}")
    for l in np.linspace(0, 2.5, 11):
        s = optimal_s(l, pace)
        print(f"  l = {l:4.2f}  s* = {s:5.3f}  " + "#" * int(round(40 * s)))

    rng = np.random.default_rng(0)
    costs = rng.gamma(2.0, 2.0, 500)
    schedule = PaceParams(p0=0.5, p_step=0.1)
    print("\nquantile schedule on 500 gamma-distributed costs:")
    for t in range(7):
        schedule = anneal(schedule, costs, t)
        s = optimal_s(costs, schedule)
        print(f"  t = {t}: lambda = {schedule.lam:7.3f}  selected {np.count_nonzero(s):3d}  "
              f"fully weighted {np.count_nonzero(s == 1):3d}  mean weight {s.mean():.3f}")


if __name__ == "__main__":
    main()
