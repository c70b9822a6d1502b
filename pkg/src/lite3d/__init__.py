"""Resource-efficient 3D CNNs: inference, static profiling and benchmarking on CPU."""

__version__ = "0.1.0"
