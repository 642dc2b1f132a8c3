"""Flow Tailor: prompt-adaptive text-to-image workflow selection toolkit."""

__version__ = "0.1.0"
__all__ = ["__version__"]
