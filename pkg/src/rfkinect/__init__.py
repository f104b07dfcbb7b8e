"""Simulated RFID + depth-camera identity fusion."""
__version__ = "0.1.0"
