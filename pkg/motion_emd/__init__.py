"""Optical-flow motion traces, EMD features and a small trainable classifier
for traffic congestion states."""

__version__ = '0.1.0'
