"""The four data-sharing configurations side by side.

No sharing, 10% fresh samples each round, 10% fixed samples and 20% fixed.
Fresh samples change the local objective every round, which shows up as a
jump in training loss at the start of each round; fixed samples do not.
Takes about three minutes on the bundled MNIST subset.
"""

import argparse

from _common import MNIST

from sofafl import RunConfig, load_mnist
from sofafl.experiments import run_ablation

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

rows = run_ablation(RunConfig(seed=args.seed), load_mnist(MNIST, subset=4000, seed=0))
print(f"{'configuration':<22}{'client avg':>11}{'total avg':>11}{'loss jump':>11}")
for row in rows:
    print(f"{row.label:<22}{row.client_average:>11.4f}{row.total_average:>11.4f}{row.mean_loss_spike:>11.4f}")
