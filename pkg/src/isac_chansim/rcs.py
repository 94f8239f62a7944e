"""Radar cross section of primitive shapes and segmented composite objects.

Physical-optics closed forms for plates, spheres and cylinders; grid
segmentation of electrically large plates under the plane-wave (far-field)
criterion; coherent/incoherent aggregation over segments; and decomposition
of an aspect-angle RCS sweep into a slow (orientation-averaged) component
and a zero-mean fast (directivity) residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import j1

# Floor used when converting sigma = 0 to dBsm.
SIGMA_FLOOR_DBSM = -100.0


class SegmentationInfeasibleError(ValueError):
    """Object cannot be segmented: far-field needs more splits than the
    wavelength bound allows (n_min > n_max)."""

    def __init__(self, n_min: int, n_max: int):
        self.n_min = n_min
        self.n_max = n_max
        super().__init__(
            f"segmentation infeasible: far-field requires N >= {n_min} segments "
            f"but the wavelength bound allows at most N = {n_max}"
        )


class FarFieldViolationError(ValueError):
    """A segment fails the plane-wave criterion for the given geometry."""

    def __init__(self, segment_index: int, required_m: float, actual_m: float):
        self.segment_index = segment_index
        super().__init__(
            f"segment {segment_index} violates the plane-wave criterion: "
            f"min range {actual_m:.3f} m <= far-field distance {required_m:.3f} m"
        )


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value}")


def _check_reflectivity(rho: float) -> None:
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {rho}")


@dataclass(frozen=True)
class RectangularPlate:
    """Flat rectangular plate, sides a x b (m). reflectivity=1 means PEC."""

    a: float
    b: float
    reflectivity: float = 1.0

    def __post_init__(self):
        _check_positive(a=self.a, b=self.b)
        _check_reflectivity(self.reflectivity)

    @property
    def max_dimension(self) -> float:
        return max(self.a, self.b)


@dataclass(frozen=True)
class CircularPlate:
    """Flat circular plate of given radius (m)."""

    radius: float
    reflectivity: float = 1.0

    def __post_init__(self):
        _check_positive(radius=self.radius)
        _check_reflectivity(self.reflectivity)

    @property
    def max_dimension(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Sphere:
    """Sphere of given radius (m); optical-region RCS is aspect-free."""

    radius: float
    reflectivity: float = 1.0

    def __post_init__(self):
        _check_positive(radius=self.radius)
        _check_reflectivity(self.reflectivity)

    @property
    def max_dimension(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Cylinder:
    """Circular cylinder, radius and height in m, axis-normal broadside."""

    radius: float
    height: float
    reflectivity: float = 1.0

    def __post_init__(self):
        _check_positive(radius=self.radius, height=self.height)
        _check_reflectivity(self.reflectivity)

    @property
    def max_dimension(self) -> float:
        return max(2.0 * self.radius, self.height)


PrimitiveShape = Union[RectangularPlate, CircularPlate, Sphere, Cylinder]


@dataclass(frozen=True)
class AspectAngles:
    """Incidence/scattering angles (rad) measured from the surface normal.

    Values in [0, pi/2] are illuminated geometry; anything outside means the
    face is shadowed and normal-dependent shapes return zero RCS.
    """

    incidence: float
    scattering: float

    @property
    def bisector(self) -> float:
        """Bistatic bisector angle used by the monostatic-equivalent forms."""
        return 0.5 * (self.incidence + self.scattering)

    @property
    def shadowed(self) -> bool:
        half_pi = 0.5 * math.pi
        return not (0.0 <= self.incidence <= half_pi and 0.0 <= self.scattering <= half_pi)


def monostatic_aspect(theta: float) -> AspectAngles:
    """Aspect with equal incidence and scattering angles (tx = rx direction)."""
    return AspectAngles(incidence=theta, scattering=theta)


@dataclass(frozen=True)
class Segment:
    """One piece of a segmented object: a primitive shape placed in space."""

    shape: PrimitiveShape
    center: np.ndarray
    normal: np.ndarray
    sigma_i: float = 0.0  # last computed RCS, m^2 (cache, not an input)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        normal = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(normal)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"segment normal must be unit length, |n| = {norm}")
        object.__setattr__(self, "normal", normal)
        if self.sigma_i < 0:
            raise ValueError("sigma_i must be >= 0")


@dataclass(frozen=True)
class SegmentedObject:
    """A target decomposed into primitive segments, plus its overall extent."""

    segments: tuple[Segment, ...]
    d_max: float

    def __post_init__(self):
        if len(self.segments) < 1:
            raise ValueError("a segmented object needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n_segments(self) -> int:
        return len(self.segments)


def far_field_distance(d_max: float, wavelength: float) -> float:
    """Fraunhofer distance 2 * d_max^2 / wavelength (m)."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    if d_max < 0:
        raise ValueError(f"d_max must be >= 0, got {d_max}")
    return 2.0 * d_max * d_max / wavelength


def plane_wave_valid(r_tx: float, r_rx: float, d_max: float, wavelength: float) -> bool:
    """True iff min(r_tx, r_rx) exceeds the far-field distance of the object."""
    _check_positive(r_tx=r_tx, r_rx=r_rx)
    return min(r_tx, r_rx) > far_field_distance(d_max, wavelength)


def _sinc(x: float) -> float:
    # unnormalized sinc: sin(x)/x
    return float(np.sinc(x / np.pi))


def primitive_rcs(shape: PrimitiveShape, wavelength: float, aspect: AspectAngles) -> float:
    """Monostatic-equivalent RCS (m^2) of a primitive shape.

    Optical-region physical-optics forms evaluated at the bistatic bisector
    angle; field amplitude scales with reflectivity, so sigma scales with
    reflectivity^2. Shadowed aspects return 0 for normal-dependent shapes.
    """
    _check_positive(wavelength=wavelength)
    rho2 = shape.reflectivity**2

    if isinstance(shape, Sphere):
        return math.pi * shape.radius**2 * rho2

    if aspect.shadowed:
        return 0.0
    theta = aspect.bisector
    if theta >= 0.5 * math.pi:
        return 0.0
    k = 2.0 * math.pi / wavelength
    cos2 = math.cos(theta) ** 2
    sin_t = math.sin(theta)

    if isinstance(shape, RectangularPlate):
        broadside = 4.0 * math.pi * shape.a**2 * shape.b**2 / wavelength**2
        return broadside * cos2 * _sinc(k * shape.a * sin_t) ** 2 * rho2

    if isinstance(shape, CircularPlate):
        area = math.pi * shape.radius**2
        broadside = 4.0 * math.pi * area**2 / wavelength**2
        x = 2.0 * k * shape.radius * sin_t
        taper = 1.0 if x == 0.0 else float(2.0 * j1(x) / x)
        return broadside * cos2 * taper**2 * rho2

    if isinstance(shape, Cylinder):
        broadside = 2.0 * math.pi * shape.radius * shape.height**2 / wavelength
        return broadside * cos2 * _sinc(k * shape.height * sin_t) ** 2 * rho2

    raise TypeError(f"unsupported shape: {type(shape).__name__}")


def segment_object(shape: PrimitiveShape, wavelength: float, r_min: float) -> SegmentedObject:
    """Split a shape into the smallest uniform grid meeting the plane-wave
    criterion at range r_min, with every segment still larger than the
    wavelength.

    Rectangular plates are tiled g x g in their own plane (centered at the
    origin, normal +z, side a along x). Other primitives cannot be tiled
    exactly by primitives, so they are returned whole when they already meet
    both criteria.

    Raises:
        SegmentationInfeasibleError: if no segment count satisfies both
            bounds (carries n_min and n_max).
    """
    _check_positive(r_min=r_min, wavelength=wavelength)

    if isinstance(shape, RectangularPlate):
        # Largest per-side split count keeping segment dimension > wavelength.
        g_max = int(math.floor(shape.max_dimension / wavelength))
        if shape.max_dimension / max(g_max, 1) <= wavelength:
            g_max -= 1
        g = 1
        while True:
            seg_dim = shape.max_dimension / g
            if plane_wave_valid(r_min, r_min, seg_dim, wavelength):
                break
            g += 1
            if g > max(g_max, 0):
                raise SegmentationInfeasibleError(n_min=g * g, n_max=max(g_max, 0) ** 2)
        if seg_dim <= wavelength:
            raise SegmentationInfeasibleError(n_min=g * g, n_max=max(g_max, 0) ** 2)
        return grid_plate(shape, g)

    # Curved primitives: single segment or infeasible.
    if not plane_wave_valid(r_min, r_min, shape.max_dimension, wavelength):
        raise SegmentationInfeasibleError(n_min=2, n_max=1)
    if shape.max_dimension <= wavelength:
        raise SegmentationInfeasibleError(n_min=1, n_max=0)
    return SegmentedObject(
        segments=(Segment(shape=shape, center=np.zeros(3), normal=np.array([0.0, 0.0, 1.0])),),
        d_max=shape.max_dimension,
    )


def grid_plate(plate: RectangularPlate, g: int, center: Sequence[float] = (0.0, 0.0, 0.0)) -> SegmentedObject:
    """Tile a rectangular plate into a g x g grid of sub-plates.

    The plate lies in the z = 0 plane of its own frame: side a along x,
    side b along y, outward normal +z, centered at `center`.
    """
    if g < 1:
        raise ValueError("grid size must be >= 1")
    sub = RectangularPlate(a=plate.a / g, b=plate.b / g, reflectivity=plate.reflectivity)
    c0 = np.asarray(center, dtype=float)
    normal = np.array([0.0, 0.0, 1.0])
    segments = []
    for i in range(g):
        for j in range(g):
            offset = np.array(
                [
                    -plate.a / 2 + (i + 0.5) * plate.a / g,
                    -plate.b / 2 + (j + 0.5) * plate.b / g,
                    0.0,
                ]
            )
            segments.append(Segment(shape=sub, center=c0 + offset, normal=normal))
    return SegmentedObject(segments=tuple(segments), d_max=plate.max_dimension)


def _segment_aspect(segment: Segment, tx_pos: np.ndarray, rx_pos: np.ndarray) -> AspectAngles:
    def angle_to_normal(p: np.ndarray) -> float:
        d = p - segment.center
        u = d / np.linalg.norm(d)
        return float(np.arccos(np.clip(np.dot(u, segment.normal), -1.0, 1.0)))

    return AspectAngles(incidence=angle_to_normal(tx_pos), scattering=angle_to_normal(rx_pos))


def object_rcs(
    obj: SegmentedObject,
    tx_pos: Sequence[float],
    rx_pos: Sequence[float],
    wavelength: float,
    mode: str = "coherent",
) -> float:
    """Aggregate RCS (m^2) of a segmented object for a tx/rx geometry.

    Incoherent mode sums segment powers; coherent mode (default) sums field
    amplitudes sqrt(sigma_i) with the exact per-segment two-way path phase
    and returns the squared magnitude.

    Raises:
        FarFieldViolationError: if any segment is closer than its own
            far-field distance to either endpoint.
    """
    if mode not in ("coherent", "incoherent"):
        raise ValueError(f"mode must be 'coherent' or 'incoherent', got {mode!r}")
    tx = np.asarray(tx_pos, dtype=float)
    rx = np.asarray(rx_pos, dtype=float)

    sigmas = np.empty(obj.n_segments)
    paths = np.empty(obj.n_segments)
    for idx, seg in enumerate(obj.segments):
        r_tx = float(np.linalg.norm(tx - seg.center))
        r_rx = float(np.linalg.norm(rx - seg.center))
        ffd = far_field_distance(seg.shape.max_dimension, wavelength)
        if min(r_tx, r_rx) <= ffd:
            raise FarFieldViolationError(idx, required_m=ffd, actual_m=min(r_tx, r_rx))
        sigmas[idx] = primitive_rcs(seg.shape, wavelength, _segment_aspect(seg, tx, rx))
        paths[idx] = r_tx + r_rx

    if mode == "incoherent":
        return float(np.sum(sigmas))
    phases = np.exp(1j * 2.0 * np.pi * paths / wavelength)
    return float(np.abs(np.sum(np.sqrt(sigmas) * phases)) ** 2)


@dataclass(frozen=True)
class RcsDecomposition:
    """Slow (orientation-averaged, dBsm) and fast (zero-mean dB residual)
    components of an aspect-angle RCS sweep."""

    slow_db: float
    aspects: tuple[AspectAngles, ...]
    fast_db: np.ndarray = field(repr=False)

    def sample_db(self, index: int) -> float:
        """Reconstructed per-sample RCS in dBsm (slow + fast)."""
        return self.slow_db + float(self.fast_db[index])


def sigma_to_db(sigma: float) -> float:
    """10*log10(sigma), with sigma = 0 floored at SIGMA_FLOOR_DBSM."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return SIGMA_FLOOR_DBSM
    return float(10.0 * np.log10(sigma))


def decompose_slow_fast(sweep: Sequence[tuple[AspectAngles, float]]) -> RcsDecomposition:
    """Split a sweep of (aspect, sigma m^2) samples into slow/fast components.

    slow_db is the mean of the per-sample dBsm values over the sweep; fast_db
    is the per-sample residual, zero-mean by construction.
    """
    if len(sweep) == 0:
        raise ValueError("sweep must be non-empty")
    aspects = tuple(a for a, _ in sweep)
    db = np.array([sigma_to_db(s) for _, s in sweep])
    slow = float(np.mean(db))
    return RcsDecomposition(slow_db=slow, aspects=aspects, fast_db=db - slow)


def sweep_plate_monostatic(
    shape: PrimitiveShape,
    wavelength: float,
    angles_rad: Sequence[float],
    rcs_fn: Callable[[float], float] | None = None,
) -> list[tuple[AspectAngles, float]]:
    """Monostatic RCS sweep over aspect angles; rcs_fn overrides the
    primitive closed form (e.g. segmented coherent evaluation)."""
    out = []
    for theta in angles_rad:
        aspect = monostatic_aspect(float(theta))
        sigma = rcs_fn(float(theta)) if rcs_fn is not None else primitive_rcs(shape, wavelength, aspect)
        out.append((aspect, sigma))
    return out


def write_sweep_csv(path, sweep: Sequence[tuple[AspectAngles, float]], decomposition: RcsDecomposition) -> None:
    """Write an RCS sweep as CSV: angle_deg,sigma_m2,sigma_dbsm,slow_dbsm,fast_db."""
    lines = ["angle_deg,sigma_m2,sigma_dbsm,slow_dbsm,fast_db"]
    for i, (aspect, sigma) in enumerate(sweep):
        angle_deg = math.degrees(aspect.incidence)
        sigma_db = sigma_to_db(sigma)
        lines.append(
            f"{angle_deg:.6g},{sigma:.12g},{sigma_db:.12g},"
            f"{decomposition.slow_db:.12g},{decomposition.fast_db[i]:.12g}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
