"""Forensic pipeline over archived engagement records: cascades, detection,
political leaning, conspiracy cohort analytics, discontinuity estimates and topics."""

__version__ = "0.1.0"
