#!/usr/bin/env python3
"""Monte Carlo validation of the Gray-QAM BER model at its SNR thresholds.

For every modulation order and BER target, transmits --bits-per-point bits at
the threshold SNR through the fading-equalization chain and prints the
empirical vs target BER as CSV. Exit 1 if any relative error exceeds 10%.
"""

import sys

from quantlink.cli import main

if __name__ == "__main__":
    sys.exit(main(["ber-check", "--bits-per-point", "10000000", *sys.argv[1:]]))
