"""Multi-tenant user-behavior analytics with transparent rule-based anomaly detection."""

__version__ = "0.1.0"
