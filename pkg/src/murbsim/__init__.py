"""Deterministic simulator of microreboot-based recovery for a crash-only,
component-hosted Internet service.

The package models an application server cluster hosting a demo auction
application, a closed-loop client population, fault injection, end-to-end
failure detection, a recovery manager with a recursive recovery policy,
heap-threshold rejuvenation, and an action-weighted availability ledger.
Everything runs on a single-seeded virtual-time kernel, so identical
configurations produce byte-identical metric output.
"""

__version__ = "0.1.0"
