"""Sealed-box speaker simulation from Thiele-Small parameters.

The driver and box are reduced to a series acoustic circuit: electrical
side (drive current, pressure source, reflected coil resistance),
mechanical side (suspension resistance and compliance, diaphragm mass),
the frequency-dependent piston radiation load, and the box air spring.
From the circuit come diaphragm excursion, volume velocity, and on-axis
SPL versus frequency, plus the -6 dB roll-off frequency of the SPL curve.

The Struve H1 and Bessel J1 evaluators are implemented here from their
series and asymptotic expansions (1e-6 absolute on the used range) so the
simulation has no special-function dependency; the test suite checks them
against direct quadrature of the integral definitions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BiseldError


@dataclass(frozen=True)
class AirProps:
    rho0: float = 1.204  # kg/m^3
    c: float = 343.0  # m/s


@dataclass(frozen=True)
class TspSet:
    """Thiele-Small parameters.

    Units follow the measurement sheet: resistances in ohms, F0 in Hz,
    S_d in m^2, V_as in liters, C_ms in m/N, masses in grams, BL in T*m,
    N0 in percent, SPL0 in dB. K_rm/E_rm/K_xm/E_xm describe the motor
    impedance rise and are carried for completeness; the acoustic circuit
    below does not use them.
    """

    r_evc: float
    f0: float
    s_d: float
    v_as: float
    c_ms: float
    m_md: float
    m_ms: float
    bl: float
    q_ms: float
    q_es: float
    q_ts: float
    n0: float = 0.0
    spl0: float = 0.0
    k_rm: float = 0.0
    e_rm: float = 0.0
    k_xm: float = 0.0
    e_xm: float = 0.0

    def __post_init__(self) -> None:
        for name in ("r_evc", "f0", "s_d", "v_as", "c_ms", "m_md", "m_ms",
                     "bl", "q_ms", "q_es", "q_ts"):
            if getattr(self, name) <= 0:
                raise BiseldError(f"{name} must be positive", field=name)
        combined = self.q_ms * self.q_es / (self.q_ms + self.q_es)
        if abs(combined - self.q_ts) > 0.05 * self.q_ts:
            raise BiseldError(
                f"q_ts={self.q_ts} inconsistent with q_ms and q_es "
                f"(combined loss {combined:.4f})", field="q_ts")

    @classmethod
    def from_json(cls, path) -> "TspSet":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise BiseldError(f"invalid JSON: {exc.msg}", path=str(path),
                              line=exc.lineno) from exc
        if not isinstance(raw, dict):
            raise BiseldError("TSP file must hold a JSON object", path=str(path))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise BiseldError(f"unknown TSP fields: {sorted(unknown)}",
                              path=str(path), field=sorted(unknown)[0])
        missing = {"r_evc", "f0", "s_d", "v_as", "c_ms", "m_md", "m_ms",
                   "bl", "q_ms", "q_es", "q_ts"} - set(raw)
        if missing:
            raise BiseldError(f"missing TSP fields: {sorted(missing)}",
                              path=str(path), field=sorted(missing)[0])
        return cls(**{k: float(v) for k, v in raw.items()})

    def to_json(self, path) -> None:
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def reference_tsp() -> TspSet:
    """Parameters of the bundled 3-inch full-range reference driver."""
    return TspSet(r_evc=6.291, f0=101.221, s_d=0.002827, v_as=1.255,
                  c_ms=0.001106, m_md=2.150, m_ms=2.236, bl=3.265,
                  q_ms=4.531, q_es=0.839, q_ts=0.708, n0=0.150, spl0=83.778,
                  k_rm=0.010251, e_rm=0.503, k_xm=0.040639, e_xm=0.392)


@dataclass(frozen=True)
class CircuitElements:
    """Frequency-independent branch values of the acoustic circuit.

    The radiation branch (R_ar, M_ar) depends on frequency; evaluate it
    with radiation_impedance using the piston radius stored here.
    """

    i: float  # drive current, A
    p_ag: float  # pressure source, Pa
    r_avc: float  # reflected coil resistance, acoustic ohms
    r_as: float  # suspension resistance, acoustic ohms
    c_as: float  # suspension compliance, m^5/N
    m_ad: float  # diaphragm mass, kg/m^4
    c_ab: float  # box air compliance, m^5/N
    piston_radius: float  # m
    s_d: float  # m^2
    air: AirProps = field(default_factory=AirProps)


def circuit_elements(tsp: TspSet, v_eg: float, v_box_cc: float,
                     air: AirProps = AirProps()) -> CircuitElements:
    """Evaluate the static circuit branches for a drive voltage and box volume."""
    if v_eg <= 0:
        raise BiseldError("drive voltage must be positive", field="v_eg")
    if v_box_cc <= 0:
        raise BiseldError("box volume must be positive", field="v_box_cc")
    i = v_eg / tsp.r_evc
    p_ag = tsp.bl * i / tsp.s_d
    r_avc = (tsp.bl / tsp.s_d) ** 2 / tsp.r_evc
    # R_ms is not on the sheet; the standard identity R_ms = w0 M_ms / Q_ms
    # recovers it from the resonance and the mechanical Q
    m_ms_kg = tsp.m_ms * 1e-3
    r_ms = 2.0 * math.pi * tsp.f0 * m_ms_kg / tsp.q_ms
    r_as = r_ms / tsp.s_d ** 2
    c_as = tsp.c_ms * tsp.s_d ** 2
    m_ad = (tsp.m_md * 1e-3) / tsp.s_d ** 2
    v_box = v_box_cc * 1e-6
    k_box = air.rho0 * air.c ** 2 * tsp.s_d ** 2 / v_box
    c_ab = tsp.s_d ** 2 / k_box
    return CircuitElements(i=i, p_ag=p_ag, r_avc=r_avc, r_as=r_as, c_as=c_as,
                           m_ad=m_ad, c_ab=c_ab,
                           piston_radius=math.sqrt(tsp.s_d / math.pi),
                           s_d=tsp.s_d, air=air)


def _asymptotic_pq(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # large-argument amplitude/phase series shared by J1 and Y1 (mu = 4)
    ix2 = 1.0 / (x * x)
    p = 1.0 + ix2 * (0.1171875 + ix2 * (-0.144195556640625 + ix2 * 0.6765925884246826))
    q = (0.375 + ix2 * (-0.1025390625 + ix2 * 0.2775764465332031)) / x
    return p, q


def _j1_small(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    term = x / 2.0
    out += term
    half_sq = (x / 2.0) ** 2
    for k in range(60):
        term = -term * half_sq / ((k + 1.0) * (k + 2.0))
        out += term
        if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(out), 1.0)):
            break
    return out


def _j1_large(x: np.ndarray) -> np.ndarray:
    p, q = _asymptotic_pq(x)
    chi = x - 0.75 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _y1_large(x: np.ndarray) -> np.ndarray:
    p, q = _asymptotic_pq(x)
    chi = x - 0.75 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.sin(chi) + q * np.cos(chi))


def bessel_j1(x):
    """First-kind Bessel J1: power series below 18, asymptotic form above."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = np.abs(arr) < 18.0
    if small.any():
        out[small] = _j1_small(arr[small])
    if (~small).any():
        big = arr[~small]
        out[~small] = np.sign(big) * _j1_large(np.abs(big))  # J1 is odd
    return float(out[0]) if scalar else out


def _h1_small(x: np.ndarray) -> np.ndarray:
    # H1(z) = sum_k (-1)^k (z/2)^(2k+2) / [Gamma(k+3/2) Gamma(k+5/2)]
    half_sq = (x / 2.0) ** 2
    term = half_sq * (2.0 / math.pi) * (4.0 / 3.0)  # k=0: (z/2)^2/[G(3/2)G(5/2)]
    out = term.copy()
    for k in range(80):
        term = -term * half_sq / ((k + 1.5) * (k + 2.5))
        out += term
        if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(out), 1.0)):
            break
    return out


def _h1_large(x: np.ndarray) -> np.ndarray:
    # H1(z) - Y1(z) ~ (2/pi)[1 + 1/z^2 - 3/z^4 + 45/z^6 - ...]
    inv_sq = 1.0 / (x * x)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(10):
        term = term * (2 * k + 1) * (1 - 2 * k) * inv_sq
        total += term
    return _y1_large(x) + (2.0 / math.pi) * total


def struve_h1(x):
    """First-order Struve function, 1e-6 absolute over the piston range."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise BiseldError("argument must be nonnegative", field="x")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr <= 20.0
    if small.any():
        out[small] = _h1_small(arr[small])
    if (~small).any():
        out[~small] = _h1_large(arr[~small])
    return float(out[0]) if scalar else out


def radiation_impedance(omega, a: float, s_d: float | None = None,
                        air: AirProps = AirProps()):
    """Piston radiation load (M_ar, R_ar) at angular frequency ``omega``.

    ``s_d`` defaults to the disk area pi a^2; pass the driver's effective
    area when it differs from the geometric piston.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise BiseldError("angular frequency must be positive", field="omega")
    if s_d is None:
        s_d = math.pi * a * a
    ka = w * a / air.c
    scale = air.rho0 * air.c / s_d
    x_ar = scale * struve_h1(2.0 * ka) / ka
    r_ar = scale * (1.0 - bessel_j1(2.0 * ka) / ka)
    m_ar = x_ar / w
    if np.asarray(omega).ndim == 0:
        return float(m_ar), float(r_ar)
    return m_ar, r_ar


@dataclass
class ResponseTable:
    freqs_hz: np.ndarray
    excursion_m: np.ndarray
    volume_velocity: np.ndarray  # m^3/s
    spl_db: np.ndarray  # re 20 uPa at the requested distance
    distance_m: float


def default_frequency_grid(n: int = 200, f_lo: float = 20.0,
                           f_hi: float = 20000.0) -> np.ndarray:
    return np.logspace(math.log10(f_lo), math.log10(f_hi), n)


def response(tsp: TspSet, v_eg: float, v_box_cc: float, r: float,
             freqs=None, air: AirProps = AirProps()) -> ResponseTable:
    """Excursion, volume velocity, and on-axis SPL over a frequency grid."""
    if r <= 0:
        raise BiseldError("microphone distance must be positive", field="r")
    f = default_frequency_grid() if freqs is None else np.asarray(freqs, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise BiseldError("frequency grid must be a nonempty 1-D array")
    if np.any(f <= 0):
        raise BiseldError(f"nonpositive frequency {f[f <= 0][0]} Hz", field="freqs")
    el = circuit_elements(tsp, v_eg, v_box_cc, air)
    w = 2.0 * math.pi * f
    m_ar, r_ar = radiation_impedance(w, el.piston_radius, el.s_d, air)
    z_as = ((el.r_avc + el.r_as + r_ar)
            + 1j * w * (el.m_ad + m_ar)
            + 1.0 / (1j * w * el.c_as) + 1.0 / (1j * w * el.c_ab))
    u_a = el.p_ag / z_as
    excursion = np.abs(u_a) / (w * el.s_d)
    spread = np.sqrt(r * r + el.s_d / math.pi) - r
    p = np.abs(u_a) * (2.0 * air.rho0 * air.c / el.s_d) * np.abs(np.sin(w / (2.0 * air.c) * spread))
    spl = 20.0 * np.log10(np.maximum(p, 1e-300) / 20e-6)
    return ResponseTable(f, excursion, np.abs(u_a), spl, r)


def find_rolloff(table: ResponseTable, ref_freq_hz: float | None = 1000.0,
                 drop_db: float = 6.0) -> float:
    """Lowest frequency where SPL first climbs to (reference - drop_db).

    ``ref_freq_hz`` picks the passband reference level; None uses the
    curve's maximum. The crossing is interpolated linearly in log
    frequency.
    """
    f = table.freqs_hz
    spl = table.spl_db
    if ref_freq_hz is None:
        ref_level = float(np.max(spl))
    else:
        if not f[0] <= ref_freq_hz <= f[-1]:
            raise BiseldError(f"reference {ref_freq_hz} Hz outside the grid",
                              field="ref_freq_hz")
        ref_level = float(np.interp(math.log10(ref_freq_hz), np.log10(f), spl))
    target = ref_level - drop_db
    above = spl >= target
    if above[0]:
        raise BiseldError("response already above the target at the lowest "
                          "frequency; no upward crossing in range")
    if not above.any():
        raise BiseldError("response never reaches the target level")
    i = int(np.argmax(above))
    lf0, lf1 = math.log10(f[i - 1]), math.log10(f[i])
    s0, s1 = spl[i - 1], spl[i]
    crossing = lf0 + (target - s0) * (lf1 - lf0) / (s1 - s0)
    return float(10.0 ** crossing)
