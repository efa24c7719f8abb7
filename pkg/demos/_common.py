"""Small helpers shared by the demo scripts."""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
MNIST = ROOT / "data" / "mnist5k"


def draw_tree(tree, node=None, indent=""):
    """Print the hierarchy as an indented outline."""
    node = tree.root if node is None else node
    n = tree[node]
    label = f"client {node}" if n.is_client else f"cluster {node}"
    print(f"{indent}{label} (weight {n.data_weight})")
    for child in n.children:
        draw_tree(tree, child, indent + "  ")


def show_report(name, report):
    print(f"{name:>14}: mean {report.mean_accuracy:.4f}  min {report.min_accuracy:.4f}  "
          f"gap {report.accuracy_gap:.4f}  jain {report.jain_index:.5f}  "
          f"bottom10% {report.bottom_decile_mean:.4f}")
