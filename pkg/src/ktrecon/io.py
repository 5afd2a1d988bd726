"""File formats: CXT tensors, run configuration, checkpoints, PNG export.

CXT layout (little-endian): magic ``CXT1``, u8 dtype tag (0 = complex
stored as float32 re/im pairs, 1 = uint8, 2 = float64), u8 ndim, then
ndim u64 axis lengths in [coil, t, y, x] order (absent leading axes
omitted), then the row-major payload.  Complex data is float64 in memory
and truncated to float32 on save, so load(save(x)) is exact at float32.

Checkpoints reuse the CXT header for the flat float64 parameter vector
and append a text manifest describing both nets after the payload.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .coils import CoilMaps, normalize
from .sampling import SamplingMask
from .tensors import DOMAINS, DynTensor

MAGIC = b"CXT1"
DTYPE_COMPLEX = 0
DTYPE_UINT8 = 1
DTYPE_FLOAT64 = 2
_ITEM_SIZE = {DTYPE_COMPLEX: 8, DTYPE_UINT8: 1, DTYPE_FLOAT64: 8}


class FormatError(ValueError):
    """Malformed CXT file or checkpoint."""


class ConfigError(ValueError):
    """Bad run-configuration file."""


# ------------------------------------------------------------------ tensors

def _write_blob(dtype: int, arr: np.ndarray) -> bytes:
    head = MAGIC + struct.pack("<BB", dtype, arr.ndim)
    head += b"".join(struct.pack("<Q", n) for n in arr.shape)
    if dtype == DTYPE_COMPLEX:
        payload = np.ascontiguousarray(arr, dtype=np.complex64).tobytes()
    elif dtype == DTYPE_UINT8:
        payload = np.ascontiguousarray(arr, dtype=np.uint8).tobytes()
    else:
        payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return head + payload


def _read_blob(buf: bytes, path) -> tuple:
    """Returns (array, dtype tag, bytes consumed)."""
    if len(buf) < 6 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: not a CXT file (bad magic)")
    dtype, ndim = struct.unpack_from("<BB", buf, 4)
    if dtype not in _ITEM_SIZE:
        raise FormatError(f"{path}: unknown dtype tag {dtype}")
    header = 6 + 8 * ndim
    if len(buf) < header:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", buf, 6)
    count = 1
    for d in dims:
        count *= int(d)  # Python ints: no wraparound for crafted headers
    if any(d == 0 for d in dims) or count > 2**40:
        raise FormatError(f"{path}: bad dimensions {dims}")
    nbytes = count * _ITEM_SIZE[dtype]
    if len(buf) < header + nbytes:
        raise FormatError(f"{path}: payload shorter than header promises")
    raw = buf[header:header + nbytes]
    if dtype == DTYPE_COMPLEX:
        arr = np.frombuffer(raw, dtype=np.complex64).astype(np.complex128)
    elif dtype == DTYPE_UINT8:
        arr = np.frombuffer(raw, dtype=np.uint8).copy()
    else:
        arr = np.frombuffer(raw, dtype="<f8").copy()
    return arr.reshape(dims), dtype, header + nbytes


def save_tensor(path, t: DynTensor) -> None:
    Path(path).write_bytes(_write_blob(DTYPE_COMPLEX, t.data))


def load_tensor(path, domain: str) -> DynTensor:
    if domain not in DOMAINS:
        raise ConfigError(f"unknown domain tag {domain!r}")
    buf = _read_file(path)
    arr, dtype, used = _read_blob(buf, path)
    if dtype != DTYPE_COMPLEX or used != len(buf):
        raise FormatError(f"{path}: not a complex tensor file")
    return DynTensor(arr, domain)


def save_mask(path, mask: SamplingMask) -> None:
    Path(path).write_bytes(_write_blob(DTYPE_UINT8, mask.data))


def load_mask(path) -> SamplingMask:
    buf = _read_file(path)
    arr, dtype, used = _read_blob(buf, path)
    if dtype != DTYPE_UINT8 or arr.ndim != 2 or used != len(buf):
        raise FormatError(f"{path}: not a mask file")
    accel = arr.size / max(1, int(arr.sum()))
    return SamplingMask(arr, accel=accel, center_band=0)


def save_maps(path, maps: CoilMaps) -> None:
    Path(path).write_bytes(
        _write_blob(DTYPE_COMPLEX, maps.data[:, None, :, :]))


def load_maps(path, renormalize: bool = True) -> CoilMaps:
    buf = _read_file(path)
    arr, dtype, used = _read_blob(buf, path)
    if dtype != DTYPE_COMPLEX or arr.ndim != 4 or arr.shape[1] != 1 \
            or used != len(buf):
        raise FormatError(f"{path}: not a coil-maps file ([coil, 1, y, x])")
    maps = CoilMaps(arr[:, 0])
    return normalize(maps) if renormalize else maps


def _read_file(path) -> bytes:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return p.read_bytes()


# -------------------------------------------------------------- checkpoints

def save_checkpoint(path, theta: np.ndarray, manifest: str) -> None:
    blob = _write_blob(DTYPE_FLOAT64, np.asarray(theta, dtype=np.float64).ravel())
    Path(path).write_bytes(blob + manifest.encode("utf-8"))


def load_checkpoint(path) -> tuple:
    """Returns (theta vector, manifest text)."""
    buf = _read_file(path)
    arr, dtype, used = _read_blob(buf, path)
    if dtype != DTYPE_FLOAT64 or arr.ndim != 1:
        raise FormatError(f"{path}: not a checkpoint file")
    return arr, buf[used:].decode("utf-8")


# --------------------------------------------------------------- PNG export

def _png_chunk(tag: bytes, body: bytes) -> bytes:
    return (struct.pack(">I", len(body)) + tag + body
            + struct.pack(">I", zlib.crc32(tag + body)))


def _png_gray_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + img[r].tobytes() for r in range(h))
    return (b"\x89PNG\r\n\x1a\n" + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9))
            + _png_chunk(b"IEND", b""))


def window_to_u8(frame: np.ndarray, wmin: float, wmax: float) -> np.ndarray:
    """Linear windowing to 8 bit: wmin -> 0, wmax -> 255, clipped."""
    if wmax <= wmin:
        raise ValueError("window max must exceed window min")
    scaled = (np.clip(frame, wmin, wmax) - wmin) / (wmax - wmin)
    return np.floor(scaled * 255.0 + 0.5).astype(np.uint8)


def export_png(frame, path, wmin: float = None, wmax: float = None,
               plow: float = 1.0, phigh: float = 99.0) -> tuple:
    """Write one real 2-D frame as deterministic 8-bit grayscale PNG.

    Explicit window (wmin, wmax) wins; otherwise the window is the
    (plow, phigh) percentile range of the frame.  Returns the window used.
    """
    arr = np.asarray(getattr(frame, "data", frame), dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"export expects a single 2-D frame, got {arr.shape}")
    if wmin is None or wmax is None:
        lo, hi = np.percentile(arr, [plow, phigh])
        wmin = lo if wmin is None else wmin
        wmax = hi if wmax is None else wmax
        if wmax <= wmin:
            wmax = wmin + 1.0
    Path(path).write_bytes(_png_gray_bytes(window_to_u8(arr, wmin, wmax)))
    return float(wmin), float(wmax)


# ------------------------------------------------------------ configuration

def _positive(x) -> bool:
    return x > 0


def _non_negative(x) -> bool:
    return x >= 0


def _unit(x) -> bool:
    return 0.0 <= x <= 1.0


_ELLIPSE_FIELDS = 8

#: key -> (python type, validator or None, help)
CONFIG_KEYS = {
    "seed": (int, _non_negative, "global RNG seed"),
    "phantom.frames": (int, _positive, "number of time frames"),
    "phantom.height": (int, _positive, "image rows (phase encodes)"),
    "phantom.width": (int, _positive, "image columns (readout)"),
    "phantom.background": (float, _unit, "background intensity"),
    "phantom.phase_cycles": (float, None, "linear phase cycles across x"),
    "maps.coils": (int, _positive, "number of receiver coils"),
    "mask.type": (str, None, "lattice | vista"),
    "mask.accel": (float, lambda r: r >= 1, "target acceleration R"),
    "mask.stride": (int, _positive, "lattice frame-offset stride"),
    "mask.center_band": (int, _non_negative, "guaranteed low-frequency lines"),
    "mask.decay": (float, None, "density decay exponent"),
    "acquire.noise": (float, _non_negative, "k-space complex noise std"),
    "recon.mode": (str, None, "classical | learned"),
    "recon.nit": (int, _non_negative, "solver iterations"),
    "recon.lambda0": (float, _unit, "data-consistency mix"),
    "recon.alpha0": (float, _unit, "x-t merge weight"),
    "recon.beta0": (float, _unit, "x-f merge weight"),
    "recon.tau_xf": (float, _non_negative, "x-f soft threshold"),
    "recon.tau_xt": (float, _non_negative, "x-t soft threshold"),
    "recon.ckpt": (str, None, "checkpoint path for learned mode"),
    "train.steps": (int, _positive, "training steps"),
    "train.lr": (float, _positive, "learning rate"),
    "train.nit": (int, _positive, "unrolled iterations"),
    "train.hidden": (int, _positive, "hidden channels"),
    "train.seed": (int, _non_negative, "training RNG seed"),
    "train.accel": (float, lambda r: r >= 1, "training acceleration R"),
    "train.sequences": (int, _positive, "number of training sequences"),
    "train.frames": (int, _positive, "training phantom frames"),
    "train.height": (int, _positive, "training phantom rows"),
    "train.width": (int, _positive, "training phantom columns"),
    "train.patch_w": (int, _non_negative, "readout-band patch width (0 = off)"),
    "train.augment": (int, lambda x: x in (0, 1), "flip/rotate augmentation"),
    "train.noise": (float, _non_negative, "training k-space noise std"),
    "eval.margin": (int, _non_negative, "crop margin in pixels"),
    # stage IO paths (flags override; see each subcommand's --help)
    "phantom.outdir": (str, None, "output directory for phantom artifacts"),
    "maps.out": (str, None, "coil maps output file"),
    "mask.out": (str, None, "mask output file"),
    "mask.fig": (str, None, "optional mask figure path"),
    "acquire.gt": (str, None, "ground-truth input file"),
    "acquire.maps": (str, None, "coil maps input file"),
    "acquire.mask": (str, None, "mask source: lattice | vista | file:PATH"),
    "acquire.out": (str, None, "k-space output file"),
    "recon.input": (str, None, "k-space input file"),
    "recon.mask": (str, None, "mask source: lattice | vista | file:PATH"),
    "recon.maps": (str, None, "coil maps input file"),
    "recon.out": (str, None, "reconstruction output file"),
    "recon.trace": (str, None, "objective trace CSV path"),
    "train.ckpt": (str, None, "checkpoint output path"),
    "eval.recon": (str, None, "reconstruction input file"),
    "eval.gt": (str, None, "ground-truth input file"),
    "eval.out": (str, None, "report CSV path"),
    "eval.figures": (int, lambda x: x in (0, 1), "render report figures"),
    "export.input": (str, None, "tensor input file"),
    "export.frame": (int, _non_negative, "frame index"),
    "export.out": (str, None, "PNG output path"),
    "export.diff": (str, None, "export |input - diff| instead"),
    "export.wmin": (float, None, "window minimum"),
    "export.wmax": (float, None, "window maximum"),
    "export.plow": (float, None, "auto-window low percentile"),
    "export.phigh": (float, None, "auto-window high percentile"),
}


def _is_ellipse_key(key: str) -> bool:
    head, _, tail = key.rpartition(".")
    return head == "phantom.ellipse" and tail.isdigit()


def parse_config(text: str) -> dict:
    """Parse line-oriented ``key = value`` text; unknown keys are rejected."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if _is_ellipse_key(key):
            parts = [p for p in value.split(",") if p.strip()]
            if len(parts) != _ELLIPSE_FIELDS:
                raise ConfigError(
                    f"line {lineno}: ellipse needs {_ELLIPSE_FIELDS} "
                    f"comma-separated numbers (cy,cx,ry,rx,intensity,pulse,"
                    f"sway_y,sway_x)")
            if key in out:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            out[key] = tuple(float(p) for p in parts)
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ, check, _ = CONFIG_KEYS[key]
        try:
            parsed = typ(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
        if check is not None and not check(parsed):
            raise ConfigError(f"line {lineno}: value {parsed!r} out of range "
                              f"for {key}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parsed
    return out


def load_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return parse_config(p.read_text())
