"""Per-second intro/credits detection for episodic video embeddings."""

__version__ = "0.1.0"

# Submodules are imported on first attribute access so that cheap entry
# points (CLI --help, thread-count env setup) never pay for numpy/BLAS.
_LAZY = {
    "available_backends": "_kernels",
    "backend_name": "_kernels",
    "use_backend": "_kernels",
}

__all__ = sorted(_LAZY) + ["__version__"]


def __getattr__(name):
    if name in _LAZY:
        import importlib

        module = importlib.import_module(f".{_LAZY[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
