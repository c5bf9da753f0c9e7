#!/usr/bin/env python3
"""Regenerate src/sobol_directions.cpp from the Joe-Kuo new-joe-kuo-6.21201
direction numbers (the copy bundled with scipy.stats.qmc)."""
import math
import os
import sys

import numpy as np
import scipy.stats

src = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
data = np.load(src)
poly, vinit = data["poly"], data["vinit"]

out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(__file__), "..", "src", "sobol_directions.cpp")

flat = []
for d in range(len(poly)):
    m = int(math.log2(int(poly[d]))) if poly[d] > 0 else 0
    flat.extend(int(v) for v in vinit[d, :m])

def rows(values, per_line=16):
    for i in range(0, len(values), per_line):
        yield "    " + ", ".join(str(v) for v in values[i:i + per_line]) + ","

with open(out, "w") as f:
    f.write("// Generated by tools/gen_sobol_directions.py. Do not edit.\n")
    f.write("// Joe & Kuo (2008) direction numbers, new-joe-kuo-6.21201.\n\n")
    f.write('#include "wcam/detail/sobol_directions.hpp"\n\n')
    f.write("namespace wcam::detail {\n\n")
    f.write(f"const std::uint32_t kSobolPolynomials[kSobolMaxDimension] = {{\n")
    f.write("\n".join(rows([int(p) for p in poly])) + "\n};\n\n")
    f.write(f"const std::uint32_t kSobolInitialNumbers[{len(flat)}] = {{\n")
    f.write("\n".join(rows(flat)) + "\n};\n\n")
    f.write("}  // namespace wcam::detail\n")
print(len(poly), len(flat))
