"""Attention inequality in follower networks."""
