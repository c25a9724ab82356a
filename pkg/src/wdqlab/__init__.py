"""Simulation and verification lab for queues whose interarrival and service
times depend linearly and randomly on customer waiting times."""

__version__ = "0.1.0"
