"""docforge: plan, generate, de-identify, and evaluate long structured documents."""

__version__ = "0.1.0"
