"""susing: singing voice synthesis with a stripe-pooling U-net.

Subpackages are imported lazily so the CLI can pin thread environment
variables before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "ops",
    "kernels",
    "dsp",
    "score",
    "model",
    "train",
    "corpus",
    "gradcheck",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
