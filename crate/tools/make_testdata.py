#!/usr/bin/env python3
"""Regenerate the benchmark images under testdata/.

Sources are the grayscale test images bundled with scikit-image:

  * camera    -- 512x512 photograph of a man with a camera (CC0).
  * astronaut -- 512x512 RGB portrait of Eileen Collins (public domain),
                 converted to grayscale with BT.601 luma weights.

The 256x256 variant is a 2x2 block mean of the 512x512 original.
All outputs are clipped to [1, 255] so every pixel is strictly positive,
as required by a multiplicative noise model, and written as binary PGM (P5).
"""

import numpy as np
import skimage.data


def write_pgm(path, img):
    assert img.dtype == np.uint8 and img.ndim == 2
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())
    print(f"wrote {path} ({w}x{h})")


def downsample2(img):
    h, w = img.shape
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def finalize(img):
    return np.clip(np.rint(img), 1, 255).astype(np.uint8)


def main():
    camera = skimage.data.camera().astype(np.float64)
    astro = skimage.data.astronaut().astype(np.float64)
    astro_gray = 0.299 * astro[:, :, 0] + 0.587 * astro[:, :, 1] + 0.114 * astro[:, :, 2]

    write_pgm("testdata/camera_512.pgm", finalize(camera))
    write_pgm("testdata/camera_256.pgm", finalize(downsample2(camera)))
    write_pgm("testdata/astronaut_gray_512.pgm", finalize(astro_gray))


if __name__ == "__main__":
    main()
