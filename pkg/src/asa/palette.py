"""Fixed 64-color palette shared by the synthetic image generator and the
hash-based joint image/text embedding double.

Each palette slot is one bucket of the joint embedding space: the generator
paints scene words with their bucket's color, and the image encoder recovers
the bucket histogram from the pixels. Colors are spread over HSV hue/value so
all 64 are distinct after 8-bit quantization, and the white background is not
part of the palette.
"""

from __future__ import annotations

import colorsys

N_BUCKETS = 64
BACKGROUND = (255, 255, 255)


def _build_palette() -> list[tuple[int, int, int]]:
    colors = []
    for i in range(N_BUCKETS):
        hue = (i % 16) / 16.0
        val = 0.35 + 0.18 * (i // 16)  # 4 brightness rings x 16 hues
        r, g, b = colorsys.hsv_to_rgb(hue, 0.9, val)
        colors.append((int(round(r * 255)), int(round(g * 255)), int(round(b * 255))))
    return colors


PALETTE: list[tuple[int, int, int]] = _build_palette()
_INDEX = {c: i for i, c in enumerate(PALETTE)}

assert len(_INDEX) == N_BUCKETS, "palette colors must be distinct"


def bucket_color(bucket: int) -> tuple[int, int, int]:
    return PALETTE[bucket % N_BUCKETS]


def color_bucket(rgb: tuple[int, int, int]) -> int | None:
    """Palette slot for an exact pixel color, None for background/unknown."""
    return _INDEX.get(tuple(rgb))
