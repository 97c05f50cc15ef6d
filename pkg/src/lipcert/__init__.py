"""Provable Lipschitz constants for feed-forward networks with averaged activations."""
from importlib import resources

from .activations import builtin
from .certificates import CertificateReport, CertifyOptions, certify
from .linalg import NormSpec
from .network import Layer, Network, forward, load, parse, serialize

__all__ = [
    "CertificateReport", "CertifyOptions", "Layer", "Network", "NormSpec",
    "builtin", "certify", "forward", "load", "parse", "serialize", "data_path",
]
__version__ = "0.1.0"


def data_path(name):
    """Path of a file shipped in ``lipcert/data`` (e.g. ``tanh_toy.lipnet``)."""
    return resources.files(__name__) / "data" / name
