"""Core/periphery structure of concept co-occurrence networks.

Submodules: :mod:`~coreperi.ingest`, :mod:`~coreperi.concepts`,
:mod:`~coreperi.network`, :mod:`~coreperi.coreperiphery`,
:mod:`~coreperi.metrics`, :mod:`~coreperi.nullmodel`,
:mod:`~coreperi.scientometrics`, :mod:`~coreperi.stats`,
:mod:`~coreperi.synthetic` and the :mod:`~coreperi.cli` orchestrator.
"""
from .coreperiphery import CpAssignment, SolverConfig, count_significant, detect, detect_and_test, qcp
from .network import ConceptNetwork, build_network

__version__ = "0.1.0"

__all__ = ["ConceptNetwork", "CpAssignment", "SolverConfig", "build_network", "count_significant",
           "detect", "detect_and_test", "qcp", "__version__"]
