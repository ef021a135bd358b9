"""Link-level simulation of bit-interleaved coded multiple beamforming
with perfect space-time codes on distributed-subarray mm-wave channels."""

__version__ = "0.1.0"
