"""Stateless rate-distortion compression of federated client updates."""

__version__ = "0.1.0"

from .codec import Code, EncodedUpdate, RateReport, decode_update, encode_update, rate_of
from .quantize import dequantize, quantize
from .updates import ClientUpdate, QuantizedUpdate, Quantizer, make_rng

__all__ = [
    "__version__",
    "Code",
    "EncodedUpdate",
    "RateReport",
    "decode_update",
    "encode_update",
    "rate_of",
    "dequantize",
    "quantize",
    "ClientUpdate",
    "QuantizedUpdate",
    "Quantizer",
    "make_rng",
]
