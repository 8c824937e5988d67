"""Parallel explicit-state reachability analysis for networks of labelled
transition systems, built around a lock-free bucketed hash table of packed
state vectors."""

__version__ = "0.1.0"
