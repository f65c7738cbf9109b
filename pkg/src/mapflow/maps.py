"""Catalog of built-in maps with closed-form inverses, Jacobians and
Hamiltonians.

Each entry provides a :class:`~mapflow.core.MapDescriptor` plus, where a
closed form exists, the conserved Hamiltonians and the explicit velocity
fields of the associated flow.  Entries are addressable by string id
("hermite", "henon", "kdv3", "kdv2", "qp4", "chain1d-henon") for the
command-line front end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import MapDescriptor, compose, compose_sequence, float_value, jet_log
from .errors import ConfigError, SingularPointError, UnknownMapError
from .flows import flow_system
from .polynomials import hermite_polynomials


# ---------------------------------------------------------------------------
# Hermite recurrence chain


def hermite_step(k):
    """One recurrence step (x, y) -> (x, x - k/y) with inverse y = k/(x - Y)."""
    if k < 1:
        raise ValueError("step index must be a positive integer")

    def fwd(state):
        x, y = state
        return (x, x - k / y)

    def inv(state):
        x, yk = state
        return (x, k / (x - yk))

    return MapDescriptor(
        name=f"hermite-step[{k}]",
        dimension=2,
        params={"k": k},
        forward_fn=fwd,
        inverse_fn=inv,
        forward_guards=(("y", lambda s: s[1]),),
        inverse_guards=(("X - Y", lambda s: s[0] - s[1]),),
        det_j=lambda s: k / (s[1] * s[1]),
    )


def hermite_chain(m):
    """The chain of steps k = 1..m-1; maps (x, y1) to (x, ym).

    Starting from y1 = P_1/P_0 the chain walks the ratio of consecutive
    recurrence polynomials up to ym = P_m/P_{m-1} evaluated at x.
    """
    if m < 2:
        raise ValueError("chain length m must be at least 2")
    steps = tuple(hermite_step(k) for k in range(1, m))

    def det_j(state):
        # (m-1)! / (y^(m-1) ... y^(1))^2 with y^(k+1) = x - k/y^(k)
        x, y = state
        total = 1.0
        cur = y
        for k in range(1, m):
            total = total * (k / (cur * cur))
            cur = x - k / cur
        return total

    # the box keeps every intermediate y^(k) away from zero for m <= 10
    return compose_sequence(
        steps,
        name=f"hermite[m={m}]",
        params={"m": m},
        sample_box=((6.0, 8.0), (0.8, 1.2)),
        det_j=det_j,
    )


def hermite_hamiltonian(m):
    """Closed-form conserved quantity of the m-index chain, m in {2, 3}."""
    if m == 2:

        def ham(state):
            x, y = state
            return x * (x - y) ** 2

        return ham
    if m == 3:

        def ham(state):
            x, y = state
            return (2 - x * (x - y)) ** 2 / (y - x)

        return ham
    raise ValueError(f"no closed-form chain Hamiltonian for m={m}")


def hermite_source_constraint(m, c, y):
    """Initial-value curve x(y) along which the chain Hamiltonian stays fixed."""
    if float_value(y) == 0.0:
        raise SingularPointError("hermite constraint", "y", (y,))
    if m == 2:
        return c * y**2
    if m == 3:
        return c / y**2 + 1 / y
    raise ValueError(f"no source constraint for m={m}")


def hermite_flow(m):
    """Flow whose trajectories retrace the chain as y varies."""
    return flow_system(hermite_chain(m), (hermite_hamiltonian(m),), time_index=2)


def hermite_continued_fraction(m, x):
    """Bottom-up value of (m-1)/x - (m-2)/x - ... - 1/x.

    Equals (m-1) * P_{m-2}(x) / P_{m-1}(x) for the recurrence polynomials.
    """
    if m < 2:
        raise ValueError("continued fraction needs m >= 2")
    t = 0.0
    for k in range(1, m):
        den = x - t
        if abs(den) <= 1e-300:
            raise SingularPointError("hermite continued fraction", f"x - t_{k}", (x,))
        t = k / den
    return t


@dataclass(frozen=True)
class HermiteReport:
    """Outcome of the exact-arithmetic recurrence identity suite."""

    m_max: int
    ode_ok: bool
    difference_identity_ok: bool
    ladder_ok: bool
    failures: tuple

    @property
    def passed(self):
        return self.ode_ok and self.difference_identity_ok and self.ladder_ok


def hermite_checks(m_max):
    """Verify, in exact integer arithmetic, for every m <= m_max:

    (i)   P_m'' - x P_m' + m P_m = 0,
    (ii)  P_m P'_{m+1} - P_{m+1} P'_m - P_m^2 + m P_m P'_{m-1} - m P_{m-1} P'_m = 0,
    (iii) P_{m+1} = x P_m - P'_m  and  P_{m-1} = P'_m / m.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    polys = hermite_polynomials(m_max + 1)
    failures = []
    ode_ok = diff_ok = ladder_ok = True
    for m in range(1, m_max + 1):
        pm = polys[m]
        d1 = pm.derivative()
        residual = d1.derivative() - d1.shift_up() + m * pm
        if not residual.is_zero():
            ode_ok = False
            failures.append(("ode", m))
        lhs = (
            pm * polys[m + 1].derivative()
            - polys[m + 1] * d1
            - pm * pm
            + m * (pm * polys[m - 1].derivative())
            - m * (polys[m - 1] * d1)
        )
        if not lhs.is_zero():
            diff_ok = False
            failures.append(("difference", m))
        up = pm.shift_up() - d1
        if up != polys[m + 1]:
            ladder_ok = False
            failures.append(("raise", m))
        if d1.divide_exact(m) != polys[m - 1]:
            ladder_ok = False
            failures.append(("lower", m))
    return HermiteReport(
        m_max=m_max,
        ode_ok=ode_ok,
        difference_identity_ok=diff_ok,
        ladder_ok=ladder_ok,
        failures=tuple(failures),
    )


def hermite_suite(m_max, cf_points=(-0.5, 0.5, -1.7, 1.7, 3.0), cf_tol=1e-12):
    """Exact recurrence identities plus the continued-fraction cross-check.

    The identity suite runs in integer arithmetic; the continued fraction
    is floating point and compared against (m-1) P_{m-2}/P_{m-1} at a few
    sample abscissae chosen away from the polynomial zeros.
    """
    checks = hermite_checks(m_max)
    polys = hermite_polynomials(m_max)
    worst_cf = 0.0
    for m in range(2, m_max + 1):
        for x in cf_points:
            ratio = (m - 1) * polys[m - 2].eval(x) / polys[m - 1].eval(x)
            cf = hermite_continued_fraction(m, x)
            worst_cf = max(worst_cf, abs(cf - ratio) / (1.0 + abs(ratio)))
    cf_ok = worst_cf <= cf_tol
    return {
        "type": "hermite-suite",
        "m_max": m_max,
        "ode_ok": checks.ode_ok,
        "difference_identity_ok": checks.difference_identity_ok,
        "ladder_ok": checks.ladder_ok,
        "failures": [list(f) for f in checks.failures],
        "continued_fraction_max_rel_err": worst_cf,
        "continued_fraction_ok": cf_ok,
        "passed": bool(checks.passed and cf_ok),
    }


# ---------------------------------------------------------------------------
# Henon map


def henon(b, c):
    """Polynomial diffeomorphism (x, y) -> (y, y^2 - b x + c), det J = b."""
    if b == 0:
        raise ValueError("henon map needs b != 0 to be invertible")

    def fwd(state):
        x, y = state
        return (y, y * y - b * x + c)

    def inv(state):
        xk, yk = state
        return ((xk * xk - yk + c) / b, xk)

    return MapDescriptor(
        name="henon",
        dimension=2,
        params={"b": b, "c": c},
        forward_fn=fwd,
        inverse_fn=inv,
        det_j=lambda s: b,
    )


def henon_hamiltonian(m, b, c):
    """Closed-form conserved quantity after m-1 applications, m in {2, 3, 4}.

    Each form is the first source coordinate, scaled by the constant
    Jacobian determinant accumulated over the steps, rewritten in image
    coordinates.
    """
    if m == 2:

        def ham(state):
            xk, yk = state
            return xk * xk - yk + c

        return ham
    if m == 3:

        def ham(state):
            xk, yk = state
            return (xk * xk - yk + c) ** 2 / b - xk * b + c * b

        return ham
    if m == 4:

        def ham(state):
            xk, yk = state
            u = xk * xk - yk + c
            return (u * u / (b * b) - xk + c) ** 2 - u * b + c * b * b

        return ham
    raise ValueError(f"no closed-form Hamiltonian for m={m}")


def henon_flow(b, c, steps=1):
    """Flow of the steps-fold composition; conserved H has index steps + 1."""
    if steps not in (1, 2, 3):
        raise ValueError("closed-form flows cover 1..3 applications")
    return flow_system(
        compose(henon(b, c), steps),
        (henon_hamiltonian(steps + 1, b, c),),
        time_index=2,
    )


# ---------------------------------------------------------------------------
# three-point KdV lattice


def kdv3():
    """Volume-preserving three-point lattice map, det J = 1.

    The image satisfies 1/x - 1/X = Y - z and its two cyclic companions,
    which pins down the invariants preserved step to step.
    """

    def fwd(state):
        x, y, z = state
        return (
            x * (1 + x * y + x * y * y * z) / (1 + z * x + x * x * y * z),
            y * (1 + y * z + x * y * z * z) / (1 + x * y + x * y * y * z),
            z * (1 + z * x + x * x * y * z) / (1 + y * z + x * y * z * z),
        )

    def inv(state):
        xk, yk, zk = state
        return (
            xk * (1 + zk * xk + xk * yk * zk * zk) / (1 + xk * yk + xk * xk * yk * zk),
            yk * (1 + xk * yk + xk * xk * yk * zk) / (1 + yk * zk + xk * yk * yk * zk),
            zk * (1 + yk * zk + xk * yk * yk * zk) / (1 + zk * xk + xk * yk * zk * zk),
        )

    return MapDescriptor(
        name="kdv3",
        dimension=3,
        params={},
        forward_fn=fwd,
        inverse_fn=inv,
        forward_guards=(
            ("1+xy+xy^2z", lambda s: 1 + s[0] * s[1] + s[0] * s[1] * s[1] * s[2]),
            ("1+zx+x^2yz", lambda s: 1 + s[2] * s[0] + s[0] * s[0] * s[1] * s[2]),
            ("1+yz+xyz^2", lambda s: 1 + s[1] * s[2] + s[0] * s[1] * s[2] * s[2]),
        ),
        inverse_guards=(
            ("1+XY+X^2YZ", lambda s: 1 + s[0] * s[1] + s[0] * s[0] * s[1] * s[2]),
            ("1+YZ+XY^2Z", lambda s: 1 + s[1] * s[2] + s[0] * s[1] * s[1] * s[2]),
            ("1+ZX+XYZ^2", lambda s: 1 + s[2] * s[0] + s[0] * s[1] * s[2] * s[2]),
        ),
        det_j=lambda s: 1.0,
    )


@dataclass(frozen=True)
class KdvInvariants:
    """Conserved quantities of the three-point lattice map.

    u = 1/(xyz) + xyz, v = sum of every coordinate and its reciprocal,
    r = xyz, s = (1+xy)(1+yz)(1+zx).
    """

    u: float
    v: float
    r: float
    s: float


def kdv_invariants(state):
    x, y, z = state
    r = x * y * z
    return KdvInvariants(
        u=1 / r + r,
        v=1 / x + 1 / y + 1 / z + x + y + z,
        r=r,
        s=(1 + x * y) * (1 + y * z) * (1 + z * x),
    )


def kdv3_velocity(state):
    """Closed-form image velocity of the lattice flow with z as time."""
    xk, yk, zk = state
    den = (1 + yk * zk + xk * yk * yk * zk) ** 2
    top = 1 + 2 * zk * xk + 2 * xk * yk * zk * zk + xk * xk * yk * yk * zk * zk
    return (
        -xk * xk * (1 - yk * yk + 2 * yk * zk + yk * yk * zk * zk) / den,
        yk * yk * top / den,
        top / den,
    )


def kdv3_flow():
    """Flow conserving the first two source coordinates (det J = 1)."""
    mapdesc = kdv3()

    def h1(state):
        return mapdesc.inverse(state)[0]

    def h2(state):
        return mapdesc.inverse(state)[1]

    return flow_system(mapdesc, (h1, h2), time_index=3)


# ---------------------------------------------------------------------------
# two-point reduction of the KdV lattice


def kdv2(r):
    """Planar reduction of the lattice map on the surface z = r/(xy)."""
    if r == 0:
        raise ValueError("reduction parameter r must be nonzero")

    def fwd(state):
        x, y = state
        return (
            x * y * (1 + r * y + x * y) / (r + y + r * x * y),
            (r * r + r * y + x * y) / (x * (1 + r * y + x * y)),
        )

    def inv(state):
        xk, yk = state
        return (
            (r * r + r * xk + xk * yk) / (yk * (1 + r * xk + xk * yk)),
            xk * yk * (1 + r * xk + xk * yk) / (r + xk + r * xk * yk),
        )

    return MapDescriptor(
        name="kdv2",
        dimension=2,
        params={"r": r},
        forward_fn=fwd,
        inverse_fn=inv,
        forward_guards=(
            ("r+y+rxy", lambda s: r + s[1] + r * s[0] * s[1]),
            ("x", lambda s: s[0]),
            ("1+ry+xy", lambda s: 1 + r * s[1] + s[0] * s[1]),
        ),
        inverse_guards=(
            ("Y", lambda s: s[1]),
            ("1+rX+XY", lambda s: 1 + r * s[0] + s[0] * s[1]),
            ("r+X+rXY", lambda s: r + s[0] + r * s[0] * s[1]),
        ),
        det_j=lambda s: (r * r + r * s[1] + s[0] * s[1])
        / (s[0] * (r + s[1] + r * s[0] * s[1])),
    )


def kdv2_hamiltonian(r):
    """Log-form conserved quantity in image coordinates.

    Defined for positive log arguments only; no branch handling is
    attempted outside that domain.
    """

    def ham(state):
        xk, yk = state
        p = r + xk + r * xk * yk
        q = 1 + r * xk + xk * yk
        w = r * r + r * xk + xk * yk
        return r * jet_log(p / (yk * q * q)) + (1.0 / r) * jet_log(w * q / p)

    return ham


def kdv2_hamiltonian_source(r):
    """The same quantity written over source coordinates."""

    def ham(state):
        x, y = state
        return r * jet_log(x) + (1.0 / r - r) * jet_log(r + y + r * x * y)

    return ham


def kdv2_velocity(r):
    """Closed-form (dX/dy, dY/dy) of the reduced flow at a source point."""

    def rhs(state):
        x, y = state
        num_x = (
            r**3 * x**2 * y**2
            + 4 * r**2 * y**2 * x
            - 2 * x * y**2
            + 2 * r**3 * x * y
            + 2 * r**3 * y**2
            - r * y**2
            - y
            + 2 * r**4 * y
            + r**2 * y
            + r**3
        ) * x
        den_x = (r + y + r * x * y) * (r * r + r * y + x * y) * r
        num_y = (
            (1 - r * r)
            * (x * x * y + 2 * r * x * y + 2 * r * r * x + r * r * y + r**3 + r)
            * (r + y + r * x * y)
        )
        den_y = x * (1 + r * y + x * y) ** 2 * (r * r + r * y + x * y) * r
        return (num_x / den_x, num_y / den_y)

    return rhs


def kdv2_source_velocity(r):
    """Closed-form dx/dy along which the Hamiltonian's explicit y-dependence
    cancels."""

    def rhs(state):
        x, y = state
        return x * (r * r - 1) * (1 + r * x) / (r * (r * r + r * y + x * y))

    return rhs


def kdv2_flow(r):
    """Reduced flow; its source motion must follow the constraint curve."""
    return flow_system(kdv2(r), (kdv2_hamiltonian(r),), time_index=2)


# ---------------------------------------------------------------------------
# q-difference three-point map (Painleve IV family)


@dataclass(frozen=True)
class Qp4Params:
    """Multiplicative parameters of the q-difference map; q = abc."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 or self.b == 0 or self.c == 0:
            raise ValueError("qp4 parameters must all be nonzero")

    @property
    def q(self):
        return self.a * self.b * self.c


def qp4(a, b, c):
    """Three-dimensional q-difference map with constant det J = (abc)^2."""
    p = Qp4Params(a, b, c)

    def fwd(state):
        x, y, z = state
        f1 = 1 + a * x + a * b * x * y
        f2 = 1 + b * y + b * c * y * z
        f3 = 1 + c * z + c * a * z * x
        return (a * b * y * f3 / f1, b * c * z * f1 / f2, c * a * x * f2 / f3)

    def inv(state):
        xk, yk, zk = state
        g1 = 1 + xk / a + xk * zk / (a * c)
        g2 = 1 + yk / b + yk * xk / (b * a)
        g3 = 1 + zk / c + zk * yk / (c * b)
        return (
            (zk / (c * a)) * g2 / g1,
            (xk / (a * b)) * g3 / g2,
            (yk / (b * c)) * g1 / g3,
        )

    return MapDescriptor(
        name="qp4",
        dimension=3,
        params={"a": a, "b": b, "c": c},
        forward_fn=fwd,
        inverse_fn=inv,
        forward_guards=(
            ("1+ax+abxy", lambda s: 1 + a * s[0] + a * b * s[0] * s[1]),
            ("1+by+bcyz", lambda s: 1 + b * s[1] + b * c * s[1] * s[2]),
            ("1+cz+cazx", lambda s: 1 + c * s[2] + c * a * s[2] * s[0]),
        ),
        inverse_guards=(
            ("1+X/a+XZ/ac", lambda s: 1 + s[0] / a + s[0] * s[2] / (a * c)),
            ("1+Y/b+YX/ba", lambda s: 1 + s[1] / b + s[1] * s[0] / (b * a)),
            ("1+Z/c+ZY/cb", lambda s: 1 + s[2] / c + s[2] * s[1] / (c * b)),
        ),
        det_j=lambda s: p.q**2,
    )


def qp4_invariants(a, b, c, state):
    """(r, s) = (xyz, (1+ax)(1+by)(1+cz)); conserved when a = b = c = +-1."""
    x, y, z = state
    return (x * y * z, (1 + a * x) * (1 + b * y) * (1 + c * z))


def qp4_velocity(a, b, c):
    """Closed-form velocity of the flow, carrying its q and c^2 prefactors,
    as a function of the image point."""
    q = a * b * c

    def rhs(state):
        xk, yk, zk = state
        g1 = 1 + xk / a + zk * xk / (c * a)
        g2 = 1 + yk / b + xk * yk / (a * b)
        g3 = 1 + zk / c + yk * zk / (b * c)
        return (
            q * (xk / a) * (1 + xk / a) * g3 / (b * g2 * g1),
            q * (1 + yk / b) * g3 / (a * g2 * g1),
            -c * c * (zk / c) * g3 / (g1 * g2),
        )

    return rhs


QP4_NORMALIZATIONS = ("prop2", "paper-display")


def qp4_flow(a, b, c, normalization=None):
    """Flow with H1 = x(image); H2 depends on the chosen normalization.

    "prop2" scales the second Hamiltonian by the constant determinant
    (H2 = q^2 * y), "paper-display" leaves it unscaled (H2 = y).  The two
    coincide when |q| = 1; otherwise the flag is required and the
    correspondence oracle in the harness decides which one reproduces the
    map.
    """
    mapdesc = qp4(a, b, c)
    q = a * b * c
    if normalization is None:
        if not math.isclose(abs(q), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ConfigError(
                "qp4 with |abc| != 1 needs normalization='prop2' or "
                "'paper-display'"
            )
        normalization = "prop2"
    if normalization not in QP4_NORMALIZATIONS:
        raise ConfigError(f"unknown qp4 normalization {normalization!r}")
    scale = q * q if normalization == "prop2" else 1.0

    def h1(state):
        return mapdesc.inverse(state)[0]

    def h2(state):
        return scale * mapdesc.inverse(state)[1]

    return flow_system(mapdesc, (h1, h2), time_index=3)


# ---------------------------------------------------------------------------
# catalog registry


@dataclass(frozen=True)
class CatalogEntry:
    map_id: str
    description: str
    param_schema: dict  # name -> default value
    build: Callable | None
    flow: Callable | None
    needs_source_constraint: bool = False
    extra_flags: tuple = ()  # non-numeric parameters, e.g. qp4 normalization


def _build_hermite(params):
    return hermite_chain(int(params["m"]))


def _flow_hermite(params):
    return hermite_flow(int(params["m"]))


def _build_henon(params):
    return henon(params["b"], params["c"])


def _flow_henon(params):
    return henon_flow(params["b"], params["c"])


def _build_kdv3(params):
    return kdv3()


def _flow_kdv3(params):
    return kdv3_flow()


def _build_kdv2(params):
    return kdv2(params["r"])


def _flow_kdv2(params):
    return kdv2_flow(params["r"])


def _build_qp4(params):
    return qp4(params["a"], params["b"], params["c"])


def _flow_qp4(params):
    return qp4_flow(
        params["a"], params["b"], params["c"], params.get("normalization")
    )


CATALOG = {
    "hermite": CatalogEntry(
        map_id="hermite",
        description="recurrence chain (x, y) -> (x, x - k/y), k = 1..m-1",
        param_schema={"m": 2},
        build=_build_hermite,
        flow=_flow_hermite,
        needs_source_constraint=True,
    ),
    "henon": CatalogEntry(
        map_id="henon",
        description="(x, y) -> (y, y^2 - b x + c), det J = b",
        param_schema={"b": 1.0, "c": 0.0},
        build=_build_henon,
        flow=_flow_henon,
    ),
    "kdv3": CatalogEntry(
        map_id="kdv3",
        description="three-point lattice map, det J = 1, invariants u v r s",
        param_schema={},
        build=_build_kdv3,
        flow=_flow_kdv3,
    ),
    "kdv2": CatalogEntry(
        map_id="kdv2",
        description="planar reduction of kdv3 on the surface z = r/(xy)",
        param_schema={"r": 2.0},
        build=_build_kdv2,
        flow=_flow_kdv2,
        needs_source_constraint=True,
    ),
    "qp4": CatalogEntry(
        map_id="qp4",
        description="q-difference three-point map, det J = (abc)^2",
        param_schema={"a": 1.0, "b": 1.0, "c": 1.0},
        build=_build_qp4,
        flow=_flow_qp4,
        extra_flags=("normalization",),
    ),
    "chain1d-henon": CatalogEntry(
        map_id="chain1d-henon",
        description="one-dimensional three-term chain (use the chain subcommand)",
        param_schema={"m": 2, "a": 0.0, "c": 0.0},
        build=None,
        flow=None,
    ),
}


def catalog_ids():
    return sorted(CATALOG)


def get_entry(map_id):
    try:
        return CATALOG[map_id]
    except KeyError:
        raise UnknownMapError(
            f"unknown map id {map_id!r}; known: {', '.join(catalog_ids())}"
        ) from None


def resolve_params(map_id, overrides=None):
    """Merge user parameters over the schema defaults, rejecting unknowns."""
    entry = get_entry(map_id)
    params = dict(entry.param_schema)
    for name, value in (overrides or {}).items():
        if name not in entry.param_schema and name not in entry.extra_flags:
            raise ConfigError(f"map {map_id!r} has no parameter {name!r}")
        params[name] = value
    return params


def build_map(map_id, params=None):
    entry = get_entry(map_id)
    if entry.build is None:
        raise ConfigError(
            f"{map_id!r} is not a phase-space map; use the chain subcommand"
        )
    return entry.build(resolve_params(map_id, params))


def build_flow(map_id, params=None):
    entry = get_entry(map_id)
    if entry.flow is None:
        raise ConfigError(f"{map_id!r} has no associated flow")
    return entry.flow(resolve_params(map_id, params))
