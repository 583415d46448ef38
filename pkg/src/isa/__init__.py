"""Influence scopes of agents for sparse-reward cooperative MARL."""
