"""attbus: typed pub-sub middleware with an attention-pipeline toolbox."""

__version__ = "0.1.0"
