"""Personalised hierarchy vs flat clustered FL on the bundled MNIST subset.

Runs the default SOFA-FL configuration and HypCluster with K=3 on the same
20-client Dirichlet partition, then prints the fairness metrics side by side.
The worst-off clients are where the two differ most.  Takes about a minute.
"""

import argparse

from _common import MNIST, show_report

from sofafl import RunConfig, load_mnist, run_hypcluster, run_sofa

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

config = RunConfig(seed=args.seed)
data = load_mnist(MNIST, subset=4000, seed=0)
sofa = run_sofa(config, data)
hyp = run_hypcluster(config, 3, data)

show_report("SOFA-FL", sofa.report)
show_report("HypCluster K=3", hyp.report)

print("\nFive weakest clients under HypCluster and how SOFA-FL serves them:")
worst = sorted(hyp.report.per_client, key=hyp.report.per_client.get)[:5]
for c in worst:
    print(f"  client {c:2d}: HypCluster {hyp.report.per_client[c]:.4f}  SOFA-FL {sofa.report.per_client[c]:.4f}")
