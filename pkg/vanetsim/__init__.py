"""
vanetsim - Traffic / VANET Co-Simulator

This package couples a microscopic signalized-intersection traffic model with a
vehicle-to-vehicle ad hoc network layer, an RSU-style adaptive signal controller,
and a text-over-TCP control service for external clients.
"""

__version__ = "1.0.0"
