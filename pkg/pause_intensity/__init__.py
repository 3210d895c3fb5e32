"""
Pause Intensity: a buffer-underrun QoE metric for streamed video.

Modules map TCP loss to throughput, throughput to pause and play durations,
and pause traces or subjective scores to the PI metric.
"""

__version__ = "0.1.0"
