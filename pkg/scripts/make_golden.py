"""Regenerate the golden byte-layout fixtures under tests/golden/."""

from pathlib import Path

import numpy as np

from camreframe.formats import serialize_realestate, write_pgm, write_ppm, write_tensor

import sys

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from test_formats import golden_tensor, golden_trajectory  # noqa: E402

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    write_tensor(GOLDEN / "tensor.lrtf", golden_tensor())
    (GOLDEN / "trajectory.txt").write_text(
        serialize_realestate(golden_trajectory(), 64.0, 48.0), encoding="utf-8"
    )
    img = golden_tensor().reshape(2, 3, 4)[..., :4]
    rgb = np.clip(np.stack([img[0], img[1], img[0] * 0.5]), 0, 1)
    write_ppm(GOLDEN / "image.ppm", rgb)
    mask = (golden_tensor()[0] > 0.3).astype(float)
    write_pgm(GOLDEN / "mask.pgm", mask)
    print(f"wrote golden files to {GOLDEN}")


if __name__ == "__main__":
    main()
