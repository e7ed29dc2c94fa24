import math
import os
import subprocess

import numpy as np
import pytest

import flashcomm as fc


def test_bit_split_table():
    expected = {8: [8], 7: [4, 2, 1], 6: [4, 2], 5: [4, 1], 4: [4], 3: [2, 1], 2: [2]}
    for b, units in expected.items():
        assert fc.bit_split(b) == units
    with pytest.raises(fc.InvalidConfig):
        fc.bit_split(9)


def test_int5_planes_match_hand_packing():
    codes = [31, 0, 16, 1, 15, 2, 8, 4]
    planes = fc.pack_codes(codes, 5)
    assert planes[0] == bytes([0x0F, 0x10, 0x2F, 0x48])
    # Bit 4 of each code, element i at bit i of the single byte.
    assert planes[1] == bytes([sum(((c >> 4) & 1) << i for i, c in enumerate(codes))])
    assert fc.unpack_codes(planes, 5, 8) == codes


def test_pack_round_trip_random():
    rng = np.random.default_rng(0)
    for b in range(2, 9):
        codes = [int(x) for x in rng.integers(0, 1 << b, size=64)]
        planes = fc.pack_codes(codes, b)
        assert sum(len(p) for p in planes) == fc.packed_bytes(b, 64) == 64 * b // 8
        assert fc.unpack_codes(planes, b, 64) == codes


def test_intlog_scale():
    assert fc.scale_to_int(0.3) == round(math.log2(0.3) * 10)
    assert fc.int_to_scale(fc.scale_to_int(0.0)) == 0.0
    s = 0.0123
    back = fc.int_to_scale(fc.scale_to_int(s))
    assert abs(back - s) / s <= 2 ** (1 / 20) - 1


def test_footprint_golden():
    cfg = fc.QuantConfig.for_bitwidth(2)
    assert cfg.scheme == fc.Scheme.SPIKE_RESERVING and cfg.group_size == 32
    assert fc.footprint_bytes(cfg, 4096) == 2560
    cfg.scale_encoding = fc.ScaleEncoding.INTLOG
    f = fc.footprint_breakdown(cfg, 4096)
    assert (f["quantized"], f["scale_zero"], f["spikes"], f["total"]) == (1024, 256, 768, 2048)


def test_chunk_round_trip_within_half_step():
    x = fc.gen_synthetic(4096, seed=7, spiky=False)
    cfg = fc.QuantConfig.for_bitwidth(8)
    blob = fc.encode_chunk(x, cfg)
    assert len(blob) == 15 + fc.footprint_bytes(cfg, 4096)
    y = fc.decode_chunk(blob)
    assert y.dtype == np.float32 and y.shape == x.shape
    for g in range(0, 4096, cfg.group_size):
        part = x[g:g + cfg.group_size].astype(np.float64)
        step = (part.max() - part.min()) / 255
        slack = step * 2 ** -8 + np.abs(part).max() * 2 ** -8 + 1e-6
        assert np.abs(y[g:g + cfg.group_size] - part).max() <= step / 2 + slack
    with pytest.raises(fc.DecodeFormat):
        fc.decode_chunk(blob[:-1])


def test_stream_matches_quantize_dequantize():
    x = fc.gen_synthetic(5000, seed=3)
    cfg = fc.QuantConfig.for_bitwidth(4)
    y = fc.dequantize(fc.quantize(x, cfg))
    assert y.shape == (5000,)
    assert np.array_equal(y[:4096], fc.quantize_dequantize(x[:4096], cfg))


def test_topology_and_simulation():
    assert "L40" in fc.preset_names()
    topo = fc.topology("L40")
    assert len(topo["devices"]) == 8
    n = 1 << 13
    rows = fc.simulate_allreduce(bitwidths=[8], elements=n, seed=1)
    by_algo = {r["algo"]: r for r in rows}
    m = n * 2
    assert by_algo["ring"]["total_raw"] == 14 * m
    assert by_algo["ring"]["cross_numa_raw"] == 7 * m // 4
    assert by_algo["two-step"]["cross_numa_raw"] == 4 * m
    assert by_algo["hier"]["cross_numa_raw"] == m
    assert by_algo["hier-pp"]["makespan"] < by_algo["hier"]["makespan"]
    assert rows == fc.simulate_allreduce(bitwidths=[8], elements=n, seed=1)
    a2a = fc.simulate_all2all(bitwidths=[4], elements=1 << 12)
    assert a2a[0]["algo"] == "all2all-dispatch"
    with pytest.raises(fc.InvalidConfig):
        fc.simulate_allreduce(algos=["tree"], elements=n)


@pytest.mark.skipif(not os.environ.get("FCV2_BIN"), reason="fcv2 binary not provided")
def test_cli_footprint_agrees(tmp_path):
    out = subprocess.run([os.environ["FCV2_BIN"], "footprint", "--out", "csv"],
                         check=True, capture_output=True, text=True).stdout.splitlines()
    header = out[0].split(",")
    totals = {row.split(",")[header.index("scale_encoding")]: int(row.split(",")[header.index("total")])
              for row in out[1:]}
    assert totals == {"bf16": 2560, "intlog": 2048}
