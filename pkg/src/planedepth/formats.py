"""Readers and writers for every on-disk format the pipeline exchanges.

Depth maps:   PFM ("Pf", float32, little-endian, bottom-up rows) for full
              precision; 16-bit grayscale PNG in millimeters (saturates at
              65 535 mm) for previews and interchange.  Invalid pixels are
              0 in both.
Label maps:   "STSEG1" — 16-byte header (magic, u32 width, u32 height,
              u16 frame count), then one little-endian int32 per pixel,
              row-major, frame-major.
Flow fields:  .flo layout — float32 magic 202021.25, int32 width/height,
              interleaved (du, dv) float32.
Planes:       CSV with columns region,frame,alpha_x,alpha_y,alpha_z.
Point clouds: whitespace XYZ text, or packed little-endian float32 triples.
Images:       8-bit PNG / binary PPM; numbered sequences frame_%06d.png.
Confidence:   geometric-context maps as float32 .npy arrays (T, H, W, 5).

All writers go through an atomic replace so readers never see partial files.
"""

import io
import json
import os
import re
import struct

import numpy as np
from PIL import Image

from .colors import depth_preview
from .errors import DimensionMismatchError, FormatError
from .geometry import D_MAX, DepthMap

FLO_MAGIC = 202021.25
STSEG_MAGIC = b"STSEG1"
PNG16_MM_CAP = np.iinfo(np.uint16).max  # 65.535 m ceiling of the mm container


def atomic_write_bytes(path, data):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# PFM

def write_pfm(path, values):
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise DimensionMismatchError("PFM writer expects a 2-D array")
    h, w = values.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    atomic_write_bytes(path, header + np.flipud(values).astype("<f4").tobytes())


def read_pfm(path):
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise FormatError(f"{path}: not a grayscale PFM")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise FormatError(f"{path}: malformed PFM dimensions")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        data = fh.read(4 * w * h)
    if len(data) != 4 * w * h:
        raise FormatError(f"{path}: truncated PFM payload")
    endian = "<f4" if scale < 0 else ">f4"
    values = np.frombuffer(data, dtype=endian).reshape(h, w)
    return np.flipud(values).astype(np.float32)


def write_depth_pfm(path, dm):
    values = np.where(dm.valid, dm.values, 0.0)
    write_pfm(path, values)


def read_depth_pfm(path):
    values = read_pfm(path).astype(np.float64)
    return DepthMap(values, values > 0)


# ---------------------------------------------------------------------------
# 16-bit PNG depth (millimeters; the container saturates at 65.535 m, so
# far/sky depths need the PFM format for full range)

def write_depth_png16(path, dm):
    mm = np.round(dm.values * 1000.0)
    mm = np.clip(mm, 0.0, PNG16_MM_CAP)
    mm = np.where(dm.valid, mm, 0.0).astype(np.uint16)
    tmp = f"{path}.tmp.{os.getpid()}"
    Image.fromarray(mm).save(tmp, format="PNG")
    os.replace(tmp, path)


def read_depth_png16(path):
    mm = np.asarray(Image.open(path), dtype=np.uint16)
    if mm.ndim != 2:
        raise FormatError(f"{path}: depth PNG must be single channel")
    values = mm.astype(np.float64) / 1000.0
    return DepthMap(values, mm > 0)


# ---------------------------------------------------------------------------
# images and frame sequences

def write_image(path, arr):
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise FormatError("images must be uint8")
    tmp = f"{path}.tmp.{os.getpid()}"
    if path.endswith(".ppm"):
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatchError("PPM writer expects (h, w, 3)")
        h, w = arr.shape[:2]
        with open(tmp, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(arr.tobytes())
    else:
        Image.fromarray(arr).save(tmp, format="PNG")
    os.replace(tmp, path)


def read_image(path):
    if path.endswith(".ppm"):
        with open(path, "rb") as fh:
            if fh.readline().strip() != b"P6":
                raise FormatError(f"{path}: not a binary PPM")
            line = fh.readline()
            while line.startswith(b"#"):
                line = fh.readline()
            w, h = (int(t) for t in line.split())
            if int(fh.readline()) != 255:
                raise FormatError(f"{path}: only 8-bit PPM supported")
            data = fh.read(w * h * 3)
        if len(data) != w * h * 3:
            raise FormatError(f"{path}: truncated PPM payload")
        return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()
    return np.asarray(Image.open(path).convert("RGB"))


def frame_path(directory, index, ext="png"):
    return os.path.join(directory, f"frame_{index:06d}.{ext}")


def write_video_frames(directory, video, ext="png"):
    os.makedirs(directory, exist_ok=True)
    for t in range(video.shape[0]):
        write_image(frame_path(directory, t, ext), video[t])


def read_video_frames(directory):
    pattern = re.compile(r"frame_(\d{6})\.(png|ppm)$")
    entries = sorted(
        (int(m.group(1)), os.path.join(directory, name))
        for name in os.listdir(directory)
        if (m := pattern.match(name))
    )
    if not entries:
        raise FormatError(f"{directory}: no frame_%06d.png/ppm files")
    frames = [read_image(p) for _, p in entries]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"{directory}: frames differ in shape")
    return np.stack(frames)


# ---------------------------------------------------------------------------
# STSEG1 label maps

def write_labels(path, labels):
    labels = np.asarray(labels, dtype=np.int32)
    if labels.ndim != 3:
        raise DimensionMismatchError("label maps are (frames, h, w)")
    t, h, w = labels.shape
    if t > 0xFFFF:
        raise FormatError("STSEG1 stores at most 65535 frames")
    header = STSEG_MAGIC + struct.pack("<IIH", w, h, t)
    atomic_write_bytes(path, header + labels.astype("<i4").tobytes())


def read_labels(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:6] != STSEG_MAGIC:
            raise FormatError(f"{path}: not an STSEG1 label map")
        w, h, t = struct.unpack("<IIH", header[6:])
        data = fh.read(4 * w * h * t)
    if len(data) != 4 * w * h * t:
        raise FormatError(f"{path}: truncated STSEG1 payload")
    return np.frombuffer(data, dtype="<i4").reshape(t, h, w).astype(np.int32)


# ---------------------------------------------------------------------------
# optical flow (.flo layout)

def write_flo(path, flow):
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DimensionMismatchError("flow fields are (h, w, 2)")
    h, w = flow.shape[:2]
    out = struct.pack("<fii", FLO_MAGIC, w, h) + flow.astype("<f4").tobytes()
    atomic_write_bytes(path, out)


def read_flo(path):
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise FormatError(f"{path}: truncated flow header")
        magic, w, h = struct.unpack("<fii", header)
        if abs(magic - FLO_MAGIC) > 1e-3:
            raise FormatError(f"{path}: bad flow magic {magic}")
        data = fh.read(8 * w * h)
    if len(data) != 8 * w * h:
        raise FormatError(f"{path}: truncated flow payload")
    return np.frombuffer(data, dtype="<f4").reshape(h, w, 2).copy()


# ---------------------------------------------------------------------------
# plane CSV

def write_planes_csv(path, planes_by_frame):
    """planes_by_frame: {frame: {region: alpha 3-vector}}."""
    lines = ["region,frame,alpha_x,alpha_y,alpha_z"]
    for frame in sorted(planes_by_frame):
        for region in sorted(planes_by_frame[frame]):
            a = [float(x) for x in planes_by_frame[frame][region]]
            lines.append(f"{region},{frame},{a[0]!r},{a[1]!r},{a[2]!r}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_planes_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "region,frame,alpha_x,alpha_y,alpha_z":
            raise FormatError(f"{path}: unexpected plane CSV header")
        out = {}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise FormatError(f"{path}: malformed plane row {line!r}")
            region, frame = int(parts[0]), int(parts[1])
            out.setdefault(frame, {})[region] = np.array(
                [float(parts[2]), float(parts[3]), float(parts[4])]
            )
    return out


# ---------------------------------------------------------------------------
# point clouds

def write_points_xyz(path, points):
    points = np.asarray(points, dtype=np.float64)
    lines = [
        f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in points
    ]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_points_xyz(path):
    points = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if points.size == 0:
        return np.zeros((0, 3))
    if points.shape[1] != 3:
        raise FormatError(f"{path}: expected 3 columns, got {points.shape[1]}")
    return points


def write_points_bin(path, points):
    points = np.asarray(points, dtype=np.float32)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DimensionMismatchError("point clouds are (n, 3)")
    atomic_write_bytes(path, points.astype("<f4").tobytes())


def read_points_bin(path):
    data = open(path, "rb").read()
    if len(data) % 12 != 0:
        raise FormatError(f"{path}: packed cloud size not a multiple of 12")
    return np.frombuffer(data, dtype="<f4").reshape(-1, 3).astype(np.float64)


# ---------------------------------------------------------------------------
# feature matrices: CSV (block-dotted header) and float32 binary + sidecar

def write_features_csv(path, rows, keys, names):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] != len(keys) or rows.shape[1] != len(names):
        raise DimensionMismatchError("rows must align with keys and names")
    lines = ["region,frame," + ",".join(names)]
    for (region, frame), row in zip(keys, rows):
        values = ",".join(repr(float(v)) for v in row)
        lines.append(f"{region},{frame},{values}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_features_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["region", "frame"]:
            raise FormatError(f"{path}: feature CSV must start region,frame")
        names = header[2:]
        rows, keys = [], []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(names) + 2:
                raise FormatError(f"{path}: row width != header width")
            keys.append((int(parts[0]), int(parts[1])))
            rows.append([float(v) for v in parts[2:]])
    return np.asarray(rows), keys, names


def write_features_bin(path, rows, keys, names):
    rows = np.asarray(rows, dtype=np.float32)
    sidecar = {
        "dtype": "<f4",
        "rows": int(rows.shape[0]),
        "cols": int(rows.shape[1]),
        "names": list(names),
        "keys": [[int(r), int(t)] for r, t in keys],
    }
    atomic_write_bytes(path, rows.astype("<f4").tobytes())
    atomic_write_bytes(
        path + ".json",
        json.dumps(sidecar, sort_keys=True).encode("utf-8"),
    )


def read_features_bin(path):
    sidecar = json.loads(open(path + ".json", "r", encoding="utf-8").read())
    data = np.frombuffer(open(path, "rb").read(), dtype=sidecar["dtype"])
    rows = data.reshape(sidecar["rows"], sidecar["cols"]).astype(np.float64)
    keys = [(r, t) for r, t in sidecar["keys"]]
    return rows, keys, sidecar["names"]


# ---------------------------------------------------------------------------
# geometric-context confidence maps

def write_gc_maps(path, maps):
    maps = np.asarray(maps, dtype=np.float32)
    if maps.ndim != 4 or maps.shape[3] != 5:
        raise DimensionMismatchError("confidence maps are (frames, h, w, 5)")
    buf = io.BytesIO()
    np.save(buf, maps, allow_pickle=False)
    atomic_write_bytes(path, buf.getvalue())


def read_gc_maps(path):
    maps = np.load(path, allow_pickle=False)
    if maps.ndim != 4 or maps.shape[3] != 5:
        raise FormatError(f"{path}: confidence maps must be (t, h, w, 5)")
    return maps.astype(np.float64)


# ---------------------------------------------------------------------------
# depth preview PNG

def write_depth_preview(path, dm, d_max=D_MAX):
    write_image(path, depth_preview(dm.values, dm.valid, d_max))


# ---------------------------------------------------------------------------
# key = value config files

def write_keyvalue(path, mapping):
    lines = [f"{k} = {mapping[k]}" for k in sorted(mapping)]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_keyvalue(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
