"""Counterparty-credit-limit trading: QCLOB engine, network model and analytics."""

__version__ = "0.1.0"
