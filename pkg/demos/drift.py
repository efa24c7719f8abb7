"""A client changes its data distribution mid-training and is regrafted.

Two groups of four clients draw from well-separated synthetic tasks.  At
round 10 client 0 starts sampling from the other group.  Its local updates
turn towards the new group, and the next SHAPE pass grafts it (or the small
cluster holding it) under a cluster of the group it joined.  In the same
pass the split step may still find the newcomer incoherent with its new
siblings, since its model was trained on the old task, and lift it out as a
singleton under the root.  Both edits are printed below.

Clusters here are compared on the direction of their latest update, not on
raw parameters.  Parameter vectors remember where a model came from, so a
drifted client keeps looking like its old neighbours for many rounds.
"""

from _common import draw_tree

from sofafl import RunConfig
from sofafl.experiments import drift_scenario

config = RunConfig(seed=0, rounds=15, hidden_dims=(16,), test_fraction=0.2, sharing_mode="off",
                   cluster_signature="update", metric="cosine")
outcome = drift_scenario(config, swap_round=10)
result = outcome.result

print("Hierarchy before the swap:")
before = next(s for s in result.snapshots if s["round"] == outcome.swap_round - 1)
parent = {n["id"]: n["parent"] for n in before["nodes"]}
print(f"  client 0 sits under cluster {parent[0]}")

for edits in result.edit_logs:
    for e in edits:
        if e["round"] < outcome.swap_round:
            continue
        if e["op"] == "graft" and outcome.client in e["leaves"]:
            child, old, new = e["nodes"]
            print(f"\nround {e['round']}: graft moves node {child} (leaves {e['leaves']}) "
                  f"from cluster {old} to cluster {new}")
        elif e["op"] == "split":
            node, parent, *parts = e["nodes"]
            print(f"round {e['round']}: split replaces cluster {node} under {parent} with nodes {parts}")
if outcome.graft_round is None:
    print("\nno graft of client 0 after the swap")
else:
    print(f"regrafted {outcome.rounds_to_graft} round(s) after the swap\n")
print("Final hierarchy (clients 0-3 started in group A, 4-7 in group B):")
draw_tree(result.tree)
