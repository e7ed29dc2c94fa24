"""Python bindings for the flashcomm codec and collective simulator."""

import json

from ._flashcomm import (
    DecodeFormat,
    EncodeRange,
    Error,
    InvalidConfig,
    InvalidData,
    IoError,
    NotApplicable,
    QuantConfig,
    ScaleEncoding,
    Scheme,
    bit_split,
    decode_chunk,
    dequantize,
    encode_chunk,
    footprint_breakdown,
    footprint_bytes,
    gen_synthetic,
    int_to_scale,
    pack_codes,
    packed_bytes,
    preset_names,
    quantize,
    quantize_dequantize,
    scale_to_int,
    unpack_codes,
)
from . import _flashcomm


def topology(preset_or_path="L40"):
    """Return a preset name or topology file as a plain dict."""
    return json.loads(_flashcomm.topology_json(preset_or_path))


def simulate_allreduce(algos=("ring", "two-step", "hier", "hier-pp"), bitwidths=(8,),
                       elements=1 << 19, seed=0, topology="L40", microchunks=8,
                       scheme=None, group_size=None, scale_encoding=ScaleEncoding.BF16):
    """Run the AllReduce variants and return one dict per table row."""
    return json.loads(_flashcomm.simulate_allreduce_json(
        list(algos), list(bitwidths), elements, seed, topology, microchunks,
        scheme, group_size, scale_encoding))


def simulate_all2all(bitwidths=(8,), elements=1 << 19, seed=0, topology="L40",
                     scheme=None, group_size=None, scale_encoding=ScaleEncoding.BF16):
    """Run the quantized-dispatch All2All and return one dict per row."""
    return json.loads(_flashcomm.simulate_all2all_json(
        list(bitwidths), elements, seed, topology, scheme, group_size, scale_encoding))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
