"""Small file-format helpers: PFM float images, PNG previews, binary PLY."""

import numpy as np

from .errors import DomainError


# ---------------------------------------------------------------------------
# PFM (float images; authoritative on-disk form for depths and textures)

def write_pfm(path, image):
    """Write a float32 PFM, little-endian, rows bottom-to-top per the format."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 2:
        header = b"Pf\n"
    elif image.ndim == 3 and image.shape[2] == 3:
        header = b"PF\n"
    else:
        raise DomainError("PFM supports HxW or HxWx3 images")
    with open(path, "wb") as f:
        f.write(header)
        f.write(f"{image.shape[1]} {image.shape[0]}\n".encode())
        f.write(b"-1.0\n")                       # negative scale = little-endian
        f.write(np.flipud(image).astype("<f4").tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        kind = f.readline().strip()
        if kind not in (b"PF", b"Pf"):
            raise DomainError(f"not a PFM file: {path}")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        count = w * h * (3 if kind == b"PF" else 1)
        dt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(count * 4), dtype=dt).astype(np.float64)
    shape = (h, w, 3) if kind == b"PF" else (h, w)
    return np.flipud(data.reshape(shape)).copy()


# ---------------------------------------------------------------------------
# PNG (8-bit preview / dataset images)

def write_png(path, image):
    """Save an image as 8-bit PNG. Float input is clipped from [0, 1]."""
    from PIL import Image
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(path)


def read_png(path):
    """Load a PNG as float64 in [0, 1]."""
    from PIL import Image
    arr = np.asarray(Image.open(path))
    return arr.astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# PLY (binary little-endian, float/uchar vertex properties only)

_PLY_TYPES = {"float": "<f4", "double": "<f8", "uchar": "u1", "int": "<i4"}


def write_ply(path, properties):
    """Write a vertex-only PLY. ``properties``: list of (name, dtype, array)."""
    n = len(properties[0][2])
    for _, _, arr in properties:
        if len(arr) != n:
            raise DomainError("all PLY properties must have equal length")
    dtype = np.dtype([(name, _PLY_TYPES[t]) for name, t, _ in properties])
    rec = np.empty(n, dtype=dtype)
    for name, t, arr in properties:
        rec[name] = np.asarray(arr)
    with open(path, "wb") as f:
        f.write(b"ply\nformat binary_little_endian 1.0\n")
        f.write(f"element vertex {n}\n".encode())
        for name, t, _ in properties:
            f.write(f"property {t} {name}\n".encode())
        f.write(b"end_header\n")
        f.write(rec.tobytes())


def read_ply(path):
    """Read a vertex-only binary PLY into {property name: float64 array}."""
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise DomainError(f"not a PLY file: {path}")
        if b"binary_little_endian" not in f.readline():
            raise DomainError("only binary little-endian PLY is supported")
        names, types, n = [], [], 0
        while True:
            line = f.readline().split()
            if not line:
                raise DomainError("unexpected end of PLY header")
            if line[0] == b"element":
                n = int(line[2])
            elif line[0] == b"property":
                types.append(line[1].decode())
                names.append(line[2].decode())
            elif line[0] == b"end_header":
                break
        dtype = np.dtype([(nm, _PLY_TYPES[t]) for nm, t in zip(names, types)])
        rec = np.frombuffer(f.read(dtype.itemsize * n), dtype=dtype)
    return {nm: rec[nm].astype(np.float64) for nm in names}
