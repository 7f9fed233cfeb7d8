"""feclab: lowest-order finite element exterior calculus on model manifolds.

The package builds Whitney-form de Rham complexes on a periodic 3-torus and
on icospheres, assembles metric-weighted mass matrices, solves the mixed
curl-curl model problem, and measures how much a computational metric
deviates from the exact pullback metric (the "variational crime" of the
geometry approximation).

Submodules are imported lazily so that lightweight entry points (the command
line interface in particular) can pin threading behaviour before numpy is
first loaded.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "mesh",
    "geometry",
    "fields",
    "whitney",
    "solver",
    "crime",
    "approximation",
    "reporting",
    "cli",
    "errors",
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
