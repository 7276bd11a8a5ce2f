"""Secure two-party L1, squared-L2 and L-infinity norms over Z_{2^l}."""
