#!/usr/bin/env python3
"""Builds IPM and PUS feature planes from a reference-decoder trace CSV.

Writes <stem>.planes: the IPM plane then the PUS plane, row-major u8, at
the picture size given on the command line. Used as an oracle for feature
image assembly; it shares no code with the Rust implementation.

usage: trace_planes.py <trace.csv> <width> <height> <out>
"""
import csv
import sys
from fractions import Fraction
from math import floor

PUS = {4: 0, 8: 85, 16: 170, 32: 255}


def half_up(q):
    return floor(q + Fraction(1, 2))


def main():
    path, width, height, out = sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
    ipm = [None] * (width * height)
    pus = [None] * (width * height)
    with open(path) as f:
        for row in csv.DictReader(f):
            x, y, size, mode = (int(row[k]) for k in ("x", "y", "size", "ipm"))
            v = half_up(Fraction(mode * 255, 34))
            for yy in range(y, y + size):
                for xx in range(x, x + size):
                    assert ipm[yy * width + xx] is None, "overlap"
                    ipm[yy * width + xx] = v
                    pus[yy * width + xx] = PUS[size]
    assert None not in ipm, "gap"
    with open(out, "wb") as f:
        f.write(bytes(ipm) + bytes(pus))


if __name__ == "__main__":
    main()
