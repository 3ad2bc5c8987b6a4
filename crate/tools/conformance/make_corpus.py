#!/usr/bin/env python3
"""Builds the conformance corpus used by crates/core/tests.

For every entry in STREAMS this script
  1. renders a source patch (center crop + scale of a public-domain test
     image from scikit-image, or a synthetic texture),
  2. encodes it with ffmpeg/libx265 using the reference all-intra config,
  3. decodes it with the instrumented reference decoder (tools/ref-trace),
     writing <name>.trace.csv and <name>.bins,
  4. cross-checks the reference decoder's luma against ffmpeg's decoder.

Requirements: pip install imageio-ffmpeg scikit-image pillow numpy, and
`cargo build --release` inside tools/ref-trace.
"""
import os
import subprocess
import sys

import imageio_ffmpeg
import numpy as np
from PIL import Image
from skimage import data

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
OUT = os.path.join(ROOT, "crates", "core", "tests", "data", "conformance")
REF = os.path.join(ROOT, "tools", "ref-trace", "target", "release", "ref-trace")
FFMPEG = imageio_ffmpeg.get_ffmpeg_exe()

# Reference encoder configuration: all-intra, one slice, no SAO, no WPP,
# no tiles, no transform skip, CTU 64, min CU 8, constant QP on I slices.
BASE_PARAMS = {
    "keyint": "1",
    "sao": "0",
    "wpp": "0",
    "tskip": "0",
    "ctu": "64",
    "min-cu-size": "8",
    "aq-mode": "0",
    "ipratio": "1",
    "info": "0",
    "slices": "1",
    "log-level": "error",
}


def source(kind, w, h, seed=0):
    if kind == "face":
        img = data.astronaut()[30:230, 140:340]
    elif kind == "face2":
        img = data.astronaut()[0:512, 0:512]
    elif kind == "coffee":
        img = data.coffee()[50:350, 150:450]
    elif kind == "cat":
        img = data.chelsea()[0:300, 50:350]
    elif kind == "camera":
        img = np.stack([data.camera()[40:300, 150:410]] * 3, axis=-1)
    elif kind == "noise":
        rng = np.random.default_rng(seed)
        yy, xx = np.mgrid[0:h, 0:w]
        base = 128 + 60 * np.sin(xx / 5.0) * np.cos(yy / 7.0)
        img = np.clip(base[..., None] + rng.normal(0, 25, (h, w, 3)), 0, 255).astype(np.uint8)
        return Image.fromarray(img)
    elif kind == "flat":
        return Image.fromarray(np.full((h, w, 3), 100, np.uint8))
    else:
        raise ValueError(kind)
    pil = Image.fromarray(img)
    side = min(pil.size)
    left = (pil.size[0] - side) // 2
    top = (pil.size[1] - side) // 2
    pil = pil.crop((left, top, left + side, top + side))
    return pil.resize((w, h), Image.BICUBIC)


# name, content, width, height, qp, extra x265 params
STREAMS = [
    ("face_064_qp22", "face", 64, 64, 22, {}),
    ("face_064_qp32", "face", 64, 64, 32, {}),
    ("face_064_qp42", "face", 64, 64, 42, {}),
    ("face_128_qp22", "face2", 128, 128, 22, {}),
    ("face_128_qp32", "face2", 128, 128, 32, {}),
    ("face_128_qp42", "face2", 128, 128, 42, {}),
    ("coffee_064_qp22", "coffee", 64, 64, 22, {}),
    ("cat_064_qp32", "cat", 64, 64, 32, {}),
    ("camera_064_qp42", "camera", 64, 64, 42, {}),
    ("coffee_128_qp22", "coffee", 128, 128, 22, {}),
    ("cat_128_qp32", "cat", 128, 128, 32, {}),
    ("noise_128_qp42", "noise", 128, 128, 42, {}),
    ("noise_064_qp22_tudepth3", "noise", 64, 64, 22, {"tu-intra-depth": "3", "rdoq-level": "0"}),
    ("camera_128_qp32_ctu32", "camera", 128, 128, 32, {"ctu": "32", "tu-intra-depth": "2"}),
    ("face_072_qp27_boundary", "face", 72, 72, 27, {}),
    ("cat_128_crf28_aq", "cat", 128, 128, None, {"crf": "28", "aq-mode": "2"}),
    ("coffee_064_qp32_nosignhide", "coffee", 64, 64, 32, {"signhide": "0"}),
    ("camera_128_qp22_mincu16", "camera", 128, 128, 22, {"min-cu-size": "16"}),
    ("flat_064_qp32", "flat", 64, 64, 32, {}),
]


def run(cmd):
    subprocess.run(cmd, check=True, stdout=subprocess.PIPE, stderr=subprocess.PIPE)


def main():
    os.makedirs(OUT, exist_ok=True)
    tmp = os.path.join(OUT, "_tmp")
    os.makedirs(tmp, exist_ok=True)
    failures = 0
    for name, kind, w, h, qp, extra in STREAMS:
        png = os.path.join(tmp, name + ".png")
        source(kind, w, h).save(png)
        params = dict(BASE_PARAMS)
        if qp is not None:
            params["qp"] = str(qp)
        params.update(extra)
        stream = os.path.join(OUT, name + ".hevc")
        run([FFMPEG, "-y", "-loglevel", "error", "-i", png, "-pix_fmt", "yuv420p",
             "-frames:v", "1", "-c:v", "libx265",
             "-x265-params", ":".join(f"{k}={v}" for k, v in params.items()),
             "-f", "hevc", stream])
        prefix = os.path.join(OUT, name)
        out = subprocess.run([REF, stream, prefix], capture_output=True, text=True)
        if out.returncode != 0:
            print("REFERENCE DECODE FAILED", name, out.stderr)
            failures += 1
            continue
        print(out.stdout.strip())
        raw = os.path.join(tmp, name + ".yuv")
        run([FFMPEG, "-y", "-loglevel", "error", "-i", stream, "-f", "rawvideo",
             "-pix_fmt", "yuv420p", raw])
        ff = open(raw, "rb").read()[: w * h]
        ref = open(prefix + ".y", "rb").read()
        if ff != ref:
            diff = sum(a != b for a, b in zip(ff, ref))
            print(f"  LUMA MISMATCH vs ffmpeg: {diff} samples differ")
            failures += 1
        else:
            print("  luma matches ffmpeg")
        os.remove(prefix + ".y")
    for f in os.listdir(tmp):
        os.remove(os.path.join(tmp, f))
    os.rmdir(tmp)
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
