#!/usr/bin/env python3
"""Build the default quantizer library (8 depths x 10 BER targets) into artifacts/.

Also writes the per-cell distortion table (optimized vs Lloyd-Max under the
same flip probability), which is the data behind the bit-depth/distortion
trade-off plots.
"""

import sys

from quantlink.cli import main

if __name__ == "__main__":
    sys.exit(main(["build-library", "--out", "artifacts", *sys.argv[1:]]))
