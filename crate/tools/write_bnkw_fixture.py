#!/usr/bin/env python3
"""Writes a small BNKW weight file using only the documented byte layout.

Usage: write_bnkw_fixture.py OUT_PATH
"""

import struct
import sys
import zlib

TENSORS = [
    ("fc.weight", [3, 2], [0.5, -1.0, 0.25, 2.0, -0.75, 1.5]),
    ("fc.bias", [2], [0.1, -0.2]),
]


def encode(tensors):
    out = bytearray(b"BNKW")
    out += struct.pack("<I", 1)
    out += struct.pack("<I", len(tensors))
    for name, shape, values in tensors:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", len(shape))
        for d in shape:
            out += struct.pack("<I", d)
        out += struct.pack("<%df" % len(values), *values)
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


if __name__ == "__main__":
    with open(sys.argv[1], "wb") as f:
        f.write(encode(TENSORS))
