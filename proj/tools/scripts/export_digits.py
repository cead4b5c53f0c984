#!/usr/bin/env python3
"""Write the scikit-learn 8x8 handwritten digits as IDX archives.

Produces digits-images-idx3-ubyte and digits-labels-idx1-ubyte in the
output directory. Pixel intensities 0..16 are rescaled to 0..255.
"""
import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/digits")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    images = np.rint(digits.images * (255.0 / 16.0)).clip(0, 255).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    n, h, w = images.shape

    with open(out / "digits-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.tobytes())
    with open(out / "digits-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())
    print(f"wrote {n} images of {h}x{w} to {out}")


if __name__ == "__main__":
    main()
