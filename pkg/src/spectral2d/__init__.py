"""Two-dimensional spectral graph convolution.

Subpackages are imported lazily so that the command-line entry point can
configure threading environment variables before any numerical library loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "graph_core",
    "spectral",
    "paradigms",
    "chebyshev",
    "model",
    "failure_lab",
    "data_io",
    "verify",
    "cli",
)

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f"{__name__}.{name}")
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
