#!/usr/bin/env python3
"""Microreboot every component group once and tabulate recovery windows."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from murbsim.config import Scenario, ScriptedMicroreboot, WorkloadConfig  # noqa: E402
from murbsim.world import World  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--clients", type=int, default=200)
    args = parser.parse_args()

    s = Scenario(seed=args.seed)
    s.policy.enabled = False
    s.workload = WorkloadConfig(clients_per_node=args.clients)
    probe = World(s)
    registry = probe.nodes[0].registry
    seen, at = set(), 30_000
    for name in registry.order:
        members = registry.groups[name].members
        if members in seen:
            continue
        seen.add(members)
        s.scripted_microreboots.append(ScriptedMicroreboot(at, name))
        at += 10_000
    s.duration_ms = at + 30_000

    world = World(s)
    world.run()
    print(f"{'target':24s} {'window_ms':>9s} {'failed_requests':>15s}")
    bad = [r for r in world.ledger.requests if r.final_class == "bad"]
    for entry in world.action_log:
        t0, t1 = entry["time_ms"], entry["time_ms"] + 10_000
        failed = sum(1 for r in bad if t0 <= r.issued_at < t1)
        print(f"{entry['target']:24s} {entry['duration_ms']:9d} {failed:15d}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
