"""Build the 100-per-class MNIST IDX fixture used by the assumption check.

The images come from the 5000-sample MNIST subset bundled in the ``mlxtend``
wheel (``mlxtend/data/data/mnist_5k.csv.gz``: 784 pixel columns followed by
the label). Usage::

    pip download --no-deps -d /tmp/wheels mlxtend
    python scripts/make_mnist_fixture.py /tmp/wheels/mlxtend-*.whl tests/data
"""
import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from ntklab.datagen import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel")
    ap.add_argument("out_dir")
    ap.add_argument("--per-class", type=int, default=100)
    args = ap.parse_args()

    with zipfile.ZipFile(args.wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    pixels, labels = table[:, :-1].astype(np.uint8), table[:, -1].astype(int)

    keep = np.concatenate([np.flatnonzero(labels == c)[: args.per_class] for c in range(10)])
    keep.sort()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "mnist100-images-idx3-ubyte.gz", out / "mnist100-labels-idx1-ubyte.gz",
              pixels[keep], labels[keep], compress=True)
    print(f"wrote {keep.size} images to {out}")


if __name__ == "__main__":
    main()
