"""urbanet: interest networks from location-based check-in data.

Builds co-visitation region graphs from review/check-in records, compares
them across platforms and spatial granularities, detects urban preference
zones, and serves an explainable high-interest region recommender.
"""

__version__ = "0.1.0"
