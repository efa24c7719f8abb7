"""Write the 5000-sample MNIST subset bundled with mlxtend as gzipped IDX files.

The mlxtend wheel ships ``mnist_5k.csv.gz`` (500 images per digit, taken from
the public MNIST training set).  This script converts it to the standard IDX
layout so that ``sofafl.data.load_idx`` can read it like the full dataset:

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist5k
"""

import argparse
import gzip
import io
import pathlib
import sys
import zipfile

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from sofafl.data import write_idx  # noqa: E402

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("wheel", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    args = parser.parse_args()

    with zipfile.ZipFile(args.wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "train-images-idx3-ubyte.gz", images)
    write_idx(args.out_dir / "train-labels-idx1-ubyte.gz", labels)
    print(f"wrote {len(labels)} samples to {args.out_dir}")


if __name__ == "__main__":
    main()
