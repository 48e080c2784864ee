"""Smooth coefficient families on [0,1].

A coefficient is an object with value(x) and deriv(x), evaluable at
scalars or arrays, complex-valued, picklable (scan workers rebuild
backends from these), and serializable to a JSON descriptor:

    {"type": "poly", "coeffs": [[re, im], ...]}            sum c_k x^k
    {"type": "trig", "terms": [{"freq": k,
                                "cos": [re, im],
                                "sin": [re, im]}, ...]}    pi-frequency basis
    {"type": "bump_zero", "interval": [lo, hi],
     "outside": <descriptor>, "collar": w}                 smooth function
                                                           vanishing exactly
                                                           on [lo, hi]

bump_zero is the construction used for coupling coefficients that must
vanish identically on an interval: outside(x) multiplied by a
C-infinity mask that is exactly 0 on [lo, hi] and exactly 1 beyond a
collar of width w on each side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def _pair(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _unpair(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"expected a number or [re, im] pair, got {v!r}")


# -- C-infinity building blocks ---------------------------------------------

def _sigma(t: np.ndarray) -> np.ndarray:
    """exp(-1/t) for t > 0, identically 0 otherwise (flat at 0)."""
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _sigma_prime(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly monotone
    in between (exponential-bump partition)."""
    t = np.asarray(t, dtype=float)
    s, s1 = _sigma(t), _sigma(1.0 - t)
    with np.errstate(invalid="ignore"):
        out = np.where(t >= 1.0, 1.0, np.where(t <= 0.0, 0.0, s / (s + s1)))
    return out


def smoothstep_prime(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t, dtype=float)
    ti = t[inside]
    s, s1 = _sigma(ti), _sigma(1.0 - ti)
    sp, s1p = _sigma_prime(ti), _sigma_prime(1.0 - ti)
    out[inside] = (sp * s1 + s * s1p) / (s + s1) ** 2
    return out


def bump_profile(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """exp(-1/(1 - t^2)) rescaled to (lo, hi), extended by 0; peak value
    e^{-1} at the midpoint."""
    x = np.asarray(x, dtype=float)
    t = (2.0 * x - (lo + hi)) / (hi - lo)
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def bump_profile_prime(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = (2.0 * x - (lo + hi)) / (hi - lo)
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    eta = np.exp(-1.0 / (1.0 - ti ** 2))
    out[inside] = eta * (-2.0 * ti / (1.0 - ti ** 2) ** 2) * (2.0 / (hi - lo))
    return out


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _maybe_scalar(out: np.ndarray, scalar: bool):
    return complex(out) if scalar else out


# -- Coefficient families ----------------------------------------------------

@dataclass(frozen=True)
class PolyCoeff:
    """Polynomial sum_k coeffs[k] x^k (empty tuple is the zero function)."""
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           tuple(complex(c) for c in self.coeffs))

    def value(self, x):
        arr, scalar = _as_array(x)
        out = np.zeros(arr.shape, dtype=complex)
        for c in reversed(self.coeffs):
            out = out * arr + c
        return _maybe_scalar(out, scalar)

    def deriv(self, x):
        arr, scalar = _as_array(x)
        out = np.zeros(arr.shape, dtype=complex)
        for k in range(len(self.coeffs) - 1, 0, -1):
            out = out * arr + k * self.coeffs[k]
        return _maybe_scalar(out, scalar)

    @property
    def descriptor(self) -> dict:
        return {"type": "poly", "coeffs": [_pair(c) for c in self.coeffs]}


@dataclass(frozen=True)
class TrigCoeff:
    """sum_k cos_k cos(k pi x) + sin_k sin(k pi x) over the given terms."""
    terms: tuple  # of (freq, cos_coeff, sin_coeff)

    def __post_init__(self):
        norm = tuple((int(k), complex(cc), complex(sc))
                     for k, cc, sc in self.terms)
        object.__setattr__(self, "terms", norm)

    def value(self, x):
        arr, scalar = _as_array(x)
        out = np.zeros(arr.shape, dtype=complex)
        for k, cc, sc in self.terms:
            kp = k * np.pi
            out += cc * np.cos(kp * arr) + sc * np.sin(kp * arr)
        return _maybe_scalar(out, scalar)

    def deriv(self, x):
        arr, scalar = _as_array(x)
        out = np.zeros(arr.shape, dtype=complex)
        for k, cc, sc in self.terms:
            kp = k * np.pi
            out += kp * (-cc * np.sin(kp * arr) + sc * np.cos(kp * arr))
        return _maybe_scalar(out, scalar)

    @property
    def descriptor(self) -> dict:
        return {"type": "trig",
                "terms": [{"freq": k, "cos": _pair(cc), "sin": _pair(sc)}
                          for k, cc, sc in self.terms]}


@dataclass(frozen=True)
class BumpZeroCoeff:
    """outside(x) * mask(x) with a C-infinity mask that vanishes exactly
    on [lo, hi] and equals 1 beyond a collar of width collar."""
    lo: float
    hi: float
    outside: "CoeffSpec"
    collar: float = 0.0  # 0 means: pick 0.8 * min(lo, 1 - hi)

    def __post_init__(self):
        if not (0.0 < self.lo < self.hi < 1.0):
            raise ValueError("bump_zero interval must satisfy 0 < lo < hi < 1")
        w = self.collar if self.collar > 0 else 0.8 * min(self.lo, 1.0 - self.hi)
        if w <= 0:
            raise ValueError("bump_zero collar must be positive")
        object.__setattr__(self, "collar", float(w))

    def _mask(self, arr):
        w = self.collar
        return smoothstep((self.lo - arr) / w) + smoothstep((arr - self.hi) / w)

    def _mask_prime(self, arr):
        w = self.collar
        return (-smoothstep_prime((self.lo - arr) / w)
                + smoothstep_prime((arr - self.hi) / w)) / w

    def value(self, x):
        arr, scalar = _as_array(x)
        out = np.asarray(self.outside.value(arr), dtype=complex) * self._mask(arr)
        return _maybe_scalar(out, scalar)

    def deriv(self, x):
        arr, scalar = _as_array(x)
        out = (np.asarray(self.outside.deriv(arr), dtype=complex) * self._mask(arr)
               + np.asarray(self.outside.value(arr), dtype=complex)
               * self._mask_prime(arr))
        return _maybe_scalar(out, scalar)

    @property
    def descriptor(self) -> dict:
        return {"type": "bump_zero", "interval": [self.lo, self.hi],
                "outside": self.outside.descriptor, "collar": self.collar}


@dataclass(frozen=True)
class AddedBumpCoeff:
    """base(x) + height * bump_profile(x) — the twin construction's
    modified multiplier coefficient.  Not part of the config schema;
    produced by twin_counterexample."""
    base: "CoeffSpec"
    lo: float
    hi: float
    height: complex

    def __post_init__(self):
        object.__setattr__(self, "height", complex(self.height))

    def value(self, x):
        arr, scalar = _as_array(x)
        out = (np.asarray(self.base.value(arr), dtype=complex)
               + self.height * bump_profile(arr, self.lo, self.hi))
        return _maybe_scalar(out, scalar)

    def deriv(self, x):
        arr, scalar = _as_array(x)
        out = (np.asarray(self.base.deriv(arr), dtype=complex)
               + self.height * bump_profile_prime(arr, self.lo, self.hi))
        return _maybe_scalar(out, scalar)

    @property
    def descriptor(self) -> dict:
        return {"type": "added_bump", "interval": [self.lo, self.hi],
                "height": _pair(self.height), "base": self.base.descriptor}


CoeffSpec = PolyCoeff | TrigCoeff | BumpZeroCoeff | AddedBumpCoeff

_SCHEMA_KEYS = {
    "poly": {"type", "coeffs"},
    "trig": {"type", "terms"},
    "bump_zero": {"type", "interval", "outside", "collar"},
}


def coeff_from_descriptor(d: dict) -> CoeffSpec:
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"coefficient descriptor must be a dict with a "
                          f"'type' key, got {d!r}")
    kind = d["type"]
    if kind not in _SCHEMA_KEYS:
        raise ConfigError(f"unknown coefficient type {kind!r}")
    extra = set(d) - _SCHEMA_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)} in {kind} descriptor")
    if kind == "poly":
        return PolyCoeff(tuple(_unpair(c) for c in d.get("coeffs", [])))
    if kind == "trig":
        terms = []
        for t in d.get("terms", []):
            if set(t) - {"freq", "cos", "sin"}:
                raise ConfigError(f"unknown keys in trig term {t!r}")
            terms.append((int(t["freq"]), _unpair(t.get("cos", 0.0)),
                          _unpair(t.get("sin", 0.0))))
        return TrigCoeff(tuple(terms))
    lo, hi = (float(v) for v in d["interval"])
    return BumpZeroCoeff(lo, hi, coeff_from_descriptor(d["outside"]),
                         collar=float(d.get("collar", 0.0)))


ZERO = PolyCoeff(())


@dataclass(frozen=True)
class Coefficients:
    """The three smooth coefficients of the coupled system on [0,1]:
    a couples the second component's derivative into the first equation,
    b couples the first component's derivative into the second equation,
    and c multiplies the second component."""
    a: CoeffSpec
    b: CoeffSpec
    c: CoeffSpec

    @property
    def tag(self) -> str:
        kinds = {type(s) for s in (self.a, self.b, self.c)}
        if kinds & {BumpZeroCoeff, AddedBumpCoeff}:
            return "bump-composite"
        if TrigCoeff in kinds:
            return "trig"
        return "polynomial"

    @property
    def descriptor(self) -> dict:
        return {"a": self.a.descriptor, "b": self.b.descriptor,
                "c": self.c.descriptor}

    def check_derivatives(self, step: float = 1e-6, tol: float = 1e-4,
                          npts: int = 17) -> None:
        """Consistency of deriv with value by central differences;
        raises ValueError on disagreement (guards hand-written specs)."""
        x = np.linspace(2 * step, 1.0 - 2 * step, npts)
        for name in ("a", "b", "c"):
            s = getattr(self, name)
            v = np.asarray(s.value(x))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"coefficient {name} is not finite on [0,1]")
            fd = (np.asarray(s.value(x + step))
                  - np.asarray(s.value(x - step))) / (2 * step)
            an = np.asarray(s.deriv(x))
            scale = 1.0 + np.max(np.abs(an))
            if np.max(np.abs(fd - an)) > tol * scale:
                raise ValueError(
                    f"coefficient {name}: analytic derivative disagrees "
                    f"with central differences")


def coefficients_from_descriptor(d: dict) -> Coefficients:
    if not isinstance(d, dict) or set(d) != {"a", "b", "c"}:
        raise ConfigError("coefficients descriptor must have exactly the "
                          "keys 'a', 'b', 'c'")
    coeffs = Coefficients(a=coeff_from_descriptor(d["a"]),
                          b=coeff_from_descriptor(d["b"]),
                          c=coeff_from_descriptor(d["c"]))
    coeffs.check_derivatives()
    return coeffs


def decoupled_laplace() -> Coefficients:
    """a = b = c = 0: two uncoupled components, the first a pure second
    derivative — every closed-form test case lives here."""
    return Coefficients(ZERO, ZERO, ZERO)
