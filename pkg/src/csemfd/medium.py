"""Resistivity models and the fictitious permittivity seen by the solver.

Model values live on the reference nodes of the interior grid.  The
diffusive-to-wave mapping uses ``sigma = 2 omega0 eps``.  Each E
component sees the harmonic mean of the conductivities at the two
nodes its edge joins.

Binary model format
-------------------
A text header::

    dims nx ny nz
    order z-fastest
    fields rho_h rho_v          (or ``fields rho`` for isotropic models)
    precision float32
    endian little

followed, in a separate file, by the raw little-endian float32 values
of each field in turn, z varying fastest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MU0 = 4e-7 * np.pi
AIR_RESISTIVITY = 1e10

__all__ = [
    "MU0",
    "AIR_RESISTIVITY",
    "ResistivityModel",
    "FictitiousMedium",
    "to_fictitious",
    "model_ingest",
    "model_emit",
    "layered_model",
    "DEEP_WATER_LAYERS",
    "SHALLOW_WATER_LAYERS",
]


@dataclass
class ResistivityModel:
    """Horizontal and vertical resistivity (ohm m) per interior node."""

    rho_h: np.ndarray
    rho_v: np.ndarray
    mu: float = MU0

    def __post_init__(self):
        self.rho_h = np.asarray(self.rho_h)
        self.rho_v = np.asarray(self.rho_v)
        if self.rho_h.ndim != 3 or self.rho_h.shape != self.rho_v.shape:
            raise ValueError("rho_h and rho_v must be 3D arrays of equal shape")
        for name, a in (("rho_h", self.rho_h), ("rho_v", self.rho_v)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            if np.any(a <= 0):
                raise ValueError(f"{name} must be positive everywhere")

    @classmethod
    def homogeneous(cls, shape, rho, anisotropy=1.0, mu=MU0):
        rho_h = np.full(shape, float(rho))
        return cls(rho_h, rho_h * anisotropy, mu)

    @property
    def dims(self):
        return self.rho_h.shape

    @property
    def air(self) -> np.ndarray:
        return self.rho_h >= AIR_RESISTIVITY

    @property
    def isotropic(self) -> bool:
        return bool(np.array_equal(self.rho_h, self.rho_v))


@dataclass
class FictitiousMedium:
    """Staggered permittivities ``eps_xx(I,j,k)``, ``eps_yy(i,J,k)``, ``eps_zz(i,j,K)``."""

    eps_xx: np.ndarray
    eps_yy: np.ndarray
    eps_zz: np.ndarray
    mu: float
    omega0: float
    c_max: float
    c_min: float

    def speed(self, component: str) -> np.ndarray:
        eps = {"x": self.eps_xx, "y": self.eps_yy, "z": self.eps_zz}[component]
        with np.errstate(divide="ignore"):
            return 1.0 / np.sqrt(self.mu * eps)


def _pad_to_grid(a, grid):
    pads = [(ax.pml_lo, ax.pml_hi) for ax in grid.axes]
    return np.pad(a, pads, mode="edge")


def _harmonic(s1, s2):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * s1 * s2 / (s1 + s2)
    out[(s1 == 0) | (s2 == 0)] = 0.0
    return out


def to_fictitious(model: ResistivityModel, grid, omega0: float,
                  interface_halving: bool | None = None) -> FictitiousMedium:
    """Map a resistivity model onto the staggered fictitious permittivities.

    The model must cover the interior nodes; PML nodes copy the edge
    values.  Air nodes get zero conductivity and do not enter ``c_max``.
    On an airwave grid the horizontal components on the top node plane
    see half the water conductivity (the dual cell is half air).
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    if tuple(model.dims) != tuple(grid.interior_shape):
        raise ValueError(
            f"model dims {model.dims} do not match grid interior {grid.interior_shape}"
        )
    if interface_halving is None:
        interface_halving = grid.airwave
    rho_h = _pad_to_grid(np.asarray(model.rho_h, dtype=float), grid)
    rho_v = _pad_to_grid(np.asarray(model.rho_v, dtype=float), grid)
    air = rho_h >= AIR_RESISTIVITY
    sig_h = np.where(air, 0.0, 1.0 / rho_h)
    sig_v = np.where(air, 0.0, 1.0 / rho_v)
    s_xx = _harmonic(sig_h[:-1], sig_h[1:])
    s_yy = _harmonic(sig_h[:, :-1], sig_h[:, 1:])
    s_zz = _harmonic(sig_v[:, :, :-1], sig_v[:, :, 1:])
    if interface_halving:
        s_xx[:, :, 0] *= 0.5
        s_yy[:, :, 0] *= 0.5
    scale = 1.0 / (2.0 * omega0)
    eps = [s * scale for s in (s_xx, s_yy, s_zz)]
    speeds = []
    for e in eps:
        live = e > 0
        if np.any(live):
            speeds.append(1.0 / np.sqrt(model.mu * e[live]))
    if not speeds:
        raise ValueError("model has no conductive nodes")
    c = np.concatenate([s.ravel() for s in speeds])
    return FictitiousMedium(eps[0], eps[1], eps[2], model.mu, omega0,
                            float(c.max()), float(c.min()))


def _parse_header(path):
    info = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, *vals = line.split()
            info[key] = vals
    try:
        dims = tuple(int(v) for v in info["dims"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: missing or bad 'dims'") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"{path}: dims must be three positive integers")
    order = info.get("order", ["z-fastest"])[0]
    if order != "z-fastest":
        raise ValueError(f"{path}: unsupported order {order!r}")
    fields = info.get("fields", ["rho_h", "rho_v"])
    if fields not in (["rho_h", "rho_v"], ["rho"]):
        raise ValueError(f"{path}: fields must be 'rho_h rho_v' or 'rho'")
    precision = info.get("precision", ["float32"])[0]
    if precision not in ("float32", "float64"):
        raise ValueError(f"{path}: unsupported precision {precision!r}")
    endian = info.get("endian", ["little"])[0]
    if endian not in ("little", "big"):
        raise ValueError(f"{path}: unsupported endian {endian!r}")
    dtype = np.dtype(("<" if endian == "little" else ">") + ("f4" if precision == "float32" else "f8"))
    return dims, fields, dtype


def model_ingest(header_path, data_path, mu: float = MU0) -> ResistivityModel:
    """Read a model written in the header + raw payload format."""
    dims, fields, dtype = _parse_header(header_path)
    raw = np.fromfile(data_path, dtype=dtype)
    n = dims[0] * dims[1] * dims[2]
    if raw.size != n * len(fields):
        raise ValueError(
            f"{data_path}: expected {n * len(fields)} values for dims {dims}, found {raw.size}"
        )
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"{data_path}: payload contains NaN or inf")
    if np.any(raw <= 0):
        raise ValueError(f"{data_path}: resistivities must be positive")
    arrays = [raw[k * n:(k + 1) * n].astype(np.float32).reshape(dims) for k in range(len(fields))]
    rho_h = arrays[0]
    rho_v = arrays[1] if len(arrays) > 1 else arrays[0].copy()
    return ResistivityModel(rho_h, rho_v, mu)


def model_emit(model: ResistivityModel, header_path, data_path):
    """Write ``model`` as float32 little-endian; inverse of :func:`model_ingest`."""
    nx, ny, nz = model.dims
    with open(header_path, "w") as fh:
        fh.write(f"dims {nx} {ny} {nz}\n")
        fh.write("order z-fastest\n")
        fh.write("fields rho_h rho_v\n")
        fh.write("precision float32\n")
        fh.write("endian little\n")
    payload = np.concatenate([
        np.ascontiguousarray(model.rho_h, dtype="<f4").ravel(),
        np.ascontiguousarray(model.rho_v, dtype="<f4").ravel(),
    ])
    payload.tofile(data_path)


# (top depth m, rho_h, anisotropy rho_v/rho_h); each layer extends to the next top
DEEP_WATER_LAYERS = [
    (0.0, 0.3, 1.0),
    (1020.0, 1.0, 1.5),
    (1900.0, 50.0, 1.5),
    (2020.0, 2.5, 1.5),
]

SHALLOW_WATER_LAYERS = [
    (0.0, 0.3, 1.0),
    (325.0, 1.0, 1.0),
    (1025.0, 2.0, 1.0),
    (1525.0, 4.0, 1.0),
]


def layered_model(x, y, z, layers, air_above: float | None = None, mu=MU0) -> ResistivityModel:
    """1D layered model sampled at node coordinates (z positive down).

    ``layers`` is a list of ``(top, rho_h, anisotropy)``; nodes with
    ``z < air_above`` become air.  A node exactly on an interface takes
    the layer below it.
    """
    tops = np.array([t for t, _, _ in layers])
    if np.any(np.diff(tops) <= 0):
        raise ValueError("layer tops must increase")
    z = np.asarray(z, dtype=float)
    idx = np.searchsorted(tops, z, side="right") - 1
    idx = np.clip(idx, 0, len(layers) - 1)
    rh = np.array([layers[k][1] for k in idx])
    rv = rh * np.array([layers[k][2] for k in idx])
    if air_above is not None:
        air = z < air_above
        rh[air] = rv[air] = 1e12
    shape = (len(x), len(y), len(z))
    rho_h = np.broadcast_to(rh, shape).copy()
    rho_v = np.broadcast_to(rv, shape).copy()
    return ResistivityModel(rho_h, rho_v, mu)
