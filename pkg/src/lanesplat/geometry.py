"""Rigid/similarity transforms, pinhole cameras and ray generation.

Conventions (fixed once, everything else in the package relies on them):

  World frame (right-handed): x forward along the lane, y left, z up.
  Camera frame (OpenCV): x right in the image, y down, z forward.
  A ``Pose`` stores the world-from-camera transform: quaternion scalar-first
  (w, x, y, z), translation = camera center in world coordinates.
  Pixel coordinates are continuous, u along width and v along height; the
  center of pixel (row r, col c) is (c + 0.5, r + 0.5).
"""

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DomainError

_UNIT_TOL = 1e-9


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first, right-handed)

def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / n


def quat_multiply(a, b):
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_to_matrix(q):
    """Rotation matrix of a (not necessarily unit) quaternion. (..., 3, 3)."""
    q = quat_normalize(q)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(q.shape[:-1] + (3, 3))


def quat_from_matrix(m):
    """Unit quaternion (w, x, y, z) of a rotation matrix, w >= 0."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_rotate(q, points):
    """Rotate points (..., 3) by quaternion q (4,)."""
    return np.asarray(points, dtype=float) @ quat_to_matrix(q).T


def quat_slerp(qa, qb, frac):
    """Spherical linear interpolation between two unit quaternions."""
    qa = quat_normalize(qa)
    qb = quat_normalize(qb)
    dot = float(np.dot(qa, qb))
    if dot < 0.0:       # take the short arc across the double cover
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(qa + frac * (qb - qa))
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    return (np.sin((1.0 - frac) * theta) * qa + np.sin(frac * theta) * qb) / np.sin(theta)


def quat_to_matrix_backward(q, d_mat):
    """Gradient of quat_to_matrix (with normalization) w.r.t. the raw q.

    q: (..., 4) raw quaternion, d_mat: (..., 3, 3) upstream gradient.
    """
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    n = q / norm
    w, x, y, z = n[..., 0], n[..., 1], n[..., 2], n[..., 3]
    zero = np.zeros_like(w)

    def pack(rows):
        return np.stack(rows, axis=-1).reshape(q.shape[:-1] + (3, 3))

    # dR/dw, dR/dx, dR/dy, dR/dz for the unit quaternion
    d_w = pack([zero, -2 * z, 2 * y,
                2 * z, zero, -2 * x,
                -2 * y, 2 * x, zero])
    d_x = pack([zero, 2 * y, 2 * z,
                2 * y, -4 * x, -2 * w,
                2 * z, 2 * w, -4 * x])
    d_y = pack([-4 * y, 2 * x, 2 * w,
                2 * x, zero, 2 * z,
                -2 * w, 2 * z, -4 * y])
    d_z = pack([-4 * z, -2 * w, 2 * x,
                2 * w, -4 * z, 2 * y,
                2 * x, 2 * y, zero])
    grad_n = np.stack([np.sum(d_mat * d, axis=(-2, -1)) for d in (d_w, d_x, d_y, d_z)],
                      axis=-1)
    # through the normalization n = q / |q|
    return (grad_n - n * np.sum(grad_n * n, axis=-1, keepdims=True)) / norm


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Pose:
    """World-from-camera rigid transform."""

    q: np.ndarray   # unit quaternion (w, x, y, z)
    t: np.ndarray   # camera center in world coordinates, meters

    def __post_init__(self):
        q = quat_normalize(np.asarray(self.q, dtype=float).reshape(4))
        t = np.asarray(self.t, dtype=float).reshape(3)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @staticmethod
    def identity():
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_matrix(m):
        m = np.asarray(m, dtype=float)
        return Pose(quat_from_matrix(m[:3, :3]), m[:3, 3])

    def rotation_matrix(self):
        return quat_to_matrix(self.q)

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix()
        m[:3, 3] = self.t
        return m

    def inverse(self):
        qi = quat_conjugate(self.q)
        return Pose(qi, -quat_rotate(qi, self.t))

    def compose(self, other):
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose(quat_multiply(self.q, other.q),
                    quat_rotate(self.q, other.t) + self.t)

    def transform(self, points):
        return quat_rotate(self.q, points) + self.t


@dataclass(frozen=True)
class Camera:
    """Distortion-free pinhole intrinsics."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.05
    far: float = 200.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DomainError("focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise DomainError("require 0 < near < far")
        if self.width < 1 or self.height < 1:
            raise DomainError("image must be at least 1x1")

    def intrinsic_matrix(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray   # unit length

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-6:
            raise DomainError("ray direction must be unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)

    def at(self, t):
        return self.origin + np.asarray(t, dtype=float)[..., None] * self.direction


@dataclass(frozen=True)
class Similarity:
    """p -> scale * R p + t."""

    scale: float
    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError("similarity scale must be positive")
        object.__setattr__(self, "q", quat_normalize(np.asarray(self.q, dtype=float).reshape(4)))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))

    @staticmethod
    def identity():
        return Similarity(1.0, np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    def transform(self, points):
        return self.scale * quat_rotate(self.q, points) + self.t

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.scale * quat_to_matrix(self.q)
        m[:3, 3] = self.t
        return m


def transform_point(transform, point):
    """Affine action of a Pose or Similarity on a 3-vector (or batch)."""
    return transform.transform(point)


# ---------------------------------------------------------------------------
# rays

def pixel_ray(camera, pose, px):
    """World-space ray through continuous pixel coordinates ``px = (u, v)``."""
    u, v = float(px[0]), float(px[1])
    if not (0.0 <= u <= camera.width and 0.0 <= v <= camera.height):
        raise DomainError(f"pixel ({u}, {v}) outside image bounds")
    d_cam = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    d = quat_rotate(pose.q, d_cam)
    return Ray(pose.t, d / np.linalg.norm(d))


def camera_rays(camera, pose):
    """Rays through all pixel centers.

    Returns (origin (3,), directions (H, W, 3) unit length).
    """
    u = np.arange(camera.width) + 0.5
    v = np.arange(camera.height) + 0.5
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([(uu - camera.cx) / camera.fx,
                      (vv - camera.cy) / camera.fy,
                      np.ones_like(uu)], axis=-1)
    d = d_cam @ quat_to_matrix(pose.q).T
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return pose.t.copy(), d


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Pose of a camera at ``eye`` with its optical axis toward ``target``."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=float))
    n = np.linalg.norm(right)
    if n < 1e-12:
        raise DomainError("view direction parallel to up vector")
    right /= n
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=1)
    return Pose(quat_from_matrix(rot), eye)


def interpolate_pose(a, b, frac):
    """Geodesic interpolation: linear translation, slerp rotation."""
    frac = float(frac)
    return Pose(quat_slerp(a.q, b.q, frac), (1.0 - frac) * a.t + frac * b.t)


# ---------------------------------------------------------------------------
# similarity alignment (Umeyama on translations)

def align_similarity(source, target):
    """Least-squares similarity mapping source pose translations onto target.

    Closed-form Umeyama fit on the translation sets; rotational residuals are
    ignored (scale is observable from translations alone).
    """
    if len(source) != len(target):
        raise AlignmentError("pose lists must have equal length")
    if len(source) < 3:
        raise AlignmentError("need at least 3 pose pairs")
    x = np.stack([p.t for p in source])
    y = np.stack([p.t for p in target])

    mx, my = x.mean(axis=0), y.mean(axis=0)
    dx, dy = x - mx, y - my
    sv = np.linalg.svd(dx, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-12):
        raise AlignmentError("source translations are collinear")

    cov = dy.T @ dx / len(x)
    u, d, vt = np.linalg.svd(cov)
    s = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[2, 2] = -1.0
    rot = u @ s @ vt
    var_x = (dx ** 2).sum() / len(x)
    scale = float((d * np.diag(s)).sum() / var_x)
    if scale <= 0:
        raise AlignmentError("degenerate configuration: non-positive scale")
    t = my - scale * rot @ mx
    return Similarity(scale, quat_from_matrix(rot), t)


# ---------------------------------------------------------------------------
# pose / camera files

def save_poses(path, poses, ids=None):
    """One pose per line: ``id tx ty tz qw qx qy qz``."""
    with open(path, "w") as f:
        for i, p in enumerate(poses):
            pid = ids[i] if ids is not None else i
            vals = " ".join(f"{v:.17g}" for v in (*p.t, *p.q))
            f.write(f"{pid} {vals}\n")


def load_poses(path):
    """Returns (ids, poses) from a pose text file."""
    ids, poses = [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise DomainError(f"malformed pose line: {line!r}")
            ids.append(parts[0])
            tx, ty, tz, qw, qx, qy, qz = map(float, parts[1:])
            poses.append(Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz])))
    return ids, poses


def save_camera(path, camera):
    import yaml
    fields = {k: getattr(camera, k)
              for k in ("fx", "fy", "cx", "cy", "width", "height", "near", "far")}
    with open(path, "w") as f:
        yaml.safe_dump(fields, f, sort_keys=True)


def load_camera(path):
    import yaml
    with open(path) as f:
        fields = yaml.safe_load(f)
    try:
        return Camera(fx=float(fields["fx"]), fy=float(fields["fy"]),
                      cx=float(fields["cx"]), cy=float(fields["cy"]),
                      width=int(fields["width"]), height=int(fields["height"]),
                      near=float(fields.get("near", 0.05)),
                      far=float(fields.get("far", 200.0)))
    except (KeyError, TypeError) as e:
        raise DomainError(f"malformed camera file {path}: {e}") from e
