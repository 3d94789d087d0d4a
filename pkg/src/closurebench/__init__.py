"""closurebench: procedural closure stimuli, CNN feature taps, and the
similarity- and configural-effect measures with their statistics."""

__version__ = "0.1.0"
