"""Regenerate the checked-in golden .bcrc file (run from tests/)."""

from pathlib import Path

import numpy as np

from grim.bcrc import encode_bcrc, to_bytes
from grim.reorder import plan_reorder


def main():
    mask = np.zeros((4, 8), dtype=bool)
    mask[0, [0, 3, 6]] = True
    mask[3, [0, 3, 6]] = True
    mask[1, [1, 4]] = True
    mask[2, [2]] = True
    w = (np.arange(32, dtype=np.float32) + 1.0).reshape(4, 8)
    w = np.where(mask, w, 0).astype(np.float32)
    b = encode_bcrc(w, mask, plan_reorder(w, mask))
    out = Path(__file__).parent / "golden" / "fig9.bcrc"
    out.parent.mkdir(exist_ok=True)
    out.write_bytes(to_bytes(b))
    print(f"wrote {out} ({out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
