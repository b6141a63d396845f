"""Camera- and GPS-aided mmWave beam prediction on synthetic V2I scenes."""

__version__ = "0.1.0"
