"""symmkit, a small branch-and-bound kernel for experimenting with symmetry handling

Symmetry handling constraints of the form ``sigma(x) >= sigma(gamma(x))`` are enforced through three
propagators (:py:mod:`symmkit.lexred`, :py:mod:`symmkit.orbitope`, :py:mod:`symmkit.orbital`), where
``sigma`` is allowed to change from node to node (:py:mod:`symmkit.prehandle`).
Everything is checked against brute force in :py:mod:`symmkit.oracle`.

The main entrypoint to the program is in :py:mod:`symmkit.__main__`,
the engine itself starts at :py:func:`symmkit.bnb.solve`.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version(__name__)
    """Version string from :py:func:`importlib.metadata.version` or 999 if not installed"""
except PackageNotFoundError:
    __version__ = "999"
