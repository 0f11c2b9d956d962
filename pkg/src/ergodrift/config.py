"""Flat ``key = value`` experiment configuration for the coupling commands."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .coeffs import (
    CoefficientSequence,
    exp_inverse_rate,
    make_custom_coeffs,
    make_exp_coeffs,
    make_fbm_coeffs,
    make_poly_coeffs,
    read_coeffs_csv,
)
from .coupling import CouplingConfig
from .dynamics import EulerModel, ou_model
from .errors import ConfigError


@dataclass(frozen=True)
class Key:
    name: str
    type: Callable
    default: Any
    help: str


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if s is None or str(s).strip().lower() in ("", "none", "auto") else float(s)


def _opt_int(s):
    return None if s is None or str(s).strip().lower() in ("", "none", "auto") else int(s)


COUPLING_KEYS = [
    # model
    Key("model", str, "ou", "dynamics model (ou)"),
    Key("kappa", float, 1.0, "OU mean-reversion rate"),
    Key("sigma-kind", str, "const", "diffusion shape: const | bounded-smooth"),
    Key("sigma", float, 1.0, "diffusion scale"),
    Key("h", float, 0.1, "Euler step"),
    Key("dim", int, 1, "state dimension"),
    # kernel
    Key("family", str, "exp", "noise kernel family: exp | poly | fbm | custom"),
    Key("ca", float, 1.0, "exp family: C_a"),
    Key("lambda", float, 1.0, "exp family: decay rate"),
    Key("rho", _opt_float, None, "poly family exponent; coupling rho (default: kernel tail exponent)"),
    Key("hurst", float, 0.3, "fbm family: Hurst parameter"),
    Key("fbm-step", float, 1.0, "fbm family: sampling step"),
    Key("k-max", int, 64, "kernel truncation length"),
    Key("coeffs", str, "", "custom family: path to k,a_k CSV"),
    Key("history", _opt_int, None, "shared past innovations (default: k-max)"),
    # coupling
    Key("mode", str, "auto", "coupling mode: poly | exp | auto (from family)"),
    Key("alpha", float, 0.5, "admissibility speed exponent"),
    Key("beta", _opt_float, None, "inverse-kernel decay exponent (poly; default from family)"),
    Key("zeta", _opt_float, None, "inverse-kernel decay rate (exp; default from family)"),
    Key("K", float, 5.0, "admissibility radius"),
    Key("K1", _opt_float, None, "Step-1 acceptance radius (default: K)"),
    Key("c2", int, 4, "base length of Step-2 intervals"),
    Key("t-star", float, 10.0, "Step-3 base duration"),
    Key("varsigma", float, 1.2, "Step-3 growth factor per trial"),
    Key("theta", float, 1.0, "Step-3 exponent on the failure index"),
    Key("eps", float, 0.01, "slack in the Step-2 budget exponent (poly)"),
    Key("ck-max", float, 10.0, "cap on the first Step-2 budget"),
    Key("c2-max", int, 1024, "cap on automatic c2 escalation"),
    Key("escalate-after", int, 3, "budget-overflow trials before c2 doubles"),
    Key("n-check", _opt_int, None, "admissibility look-ahead (default: k-max)"),
    Key("x1-0", float, 1.0, "initial position of copy 1 (all components)"),
    Key("x2-0", float, -1.0, "initial position of copy 2 (all components)"),
    Key("horizon", int, 10_000, "simulated steps"),
    # run
    Key("replicas", int, 100, "independent replicas"),
    Key("seed", _opt_int, None, "master seed (fallback: ERGODRIFT_SEED, then 0)"),
    Key("workers", _opt_int, None, "worker processes (default: available CPUs)"),
]

KEYS = {k.name: k for k in COUPLING_KEYS}


def normalize_key(key: str) -> str:
    return key.strip().replace("_", "-")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def read_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), str(path))


def resolve(file_values: dict, flag_values: dict) -> dict:
    """Typed configuration: defaults, then file values, then flags."""
    merged = {}
    for name, key in KEYS.items():
        raw = key.default
        if name in file_values:
            raw = file_values[name]
        if flag_values.get(name) is not None:
            raw = flag_values[name]
        try:
            merged[name] = key.type(raw) if raw is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name!r}: {raw!r} ({exc})") from None
    unknown = set(file_values) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    return merged


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_kernel(cfg: dict) -> CoefficientSequence:
    fam = cfg["family"]
    K = cfg["k-max"]
    if fam == "exp":
        return make_exp_coeffs(cfg["ca"], cfg["lambda"], K)
    if fam == "poly":
        if cfg["rho"] is None:
            raise ConfigError("poly family needs rho")
        return make_poly_coeffs(cfg["rho"], K)
    if fam == "fbm":
        return make_fbm_coeffs(cfg["hurst"], cfg["fbm-step"], K)
    if fam == "custom":
        if not cfg["coeffs"]:
            raise ConfigError("custom family needs coeffs = <path>")
        return make_custom_coeffs(read_coeffs_csv(cfg["coeffs"]))
    raise ConfigError(f"unknown family {fam!r}")


def build_model(cfg: dict) -> EulerModel:
    if cfg["model"] != "ou":
        raise ConfigError(f"unknown model {cfg['model']!r}; built-in models: ou")
    return ou_model(cfg["kappa"], cfg["h"], cfg["dim"], cfg["sigma-kind"], cfg["sigma"], theorem_compliant=True)


def coupling_params(cfg: dict) -> dict:
    """Fill the family-dependent coupling parameters (mode, rho, beta, lambda, zeta)."""
    fam = cfg["family"]
    mode = cfg["mode"]
    if mode == "auto":
        mode = "exp" if fam == "exp" else "poly"
    rho, beta, lam, zeta = cfg["rho"], cfg["beta"], None, cfg["zeta"]
    if fam == "fbm":
        H = cfg["hurst"]
        rho = 1.5 - H if rho is None else rho
        if beta is None and H < 0.5:
            beta = H + 0.5
    if fam == "poly" and beta is None:
        beta = rho
    if mode == "exp":
        lam = cfg["lambda"]
        if zeta is None and fam == "exp":
            z = exp_inverse_rate(cfg["ca"], cfg["lambda"])
            zeta = None if math.isinf(z) else z
    if mode == "poly" and (rho is None or beta is None):
        raise ConfigError("poly mode needs rho and beta (set them explicitly for this family)")
    return {"mode": mode, "rho": rho, "beta": beta, "lam": lam, "zeta": zeta}


def build_coupling_config(cfg: dict) -> CouplingConfig:
    p = coupling_params(cfg)
    return CouplingConfig(
        mode=p["mode"], alpha=cfg["alpha"], rho=p["rho"], beta=p["beta"], lam=p["lam"], zeta=p["zeta"],
        K=cfg["K"], c2=cfg["c2"], t_star=cfg["t-star"], varsigma=cfg["varsigma"], theta=cfg["theta"],
        horizon=cfg["horizon"], K1=cfg["K1"], eps=cfg["eps"], ck_max=cfg["ck-max"], c2_max=cfg["c2-max"],
        escalate_after=cfg["escalate-after"], n_check=cfg["n-check"], x1_0=cfg["x1-0"], x2_0=cfg["x2-0"],
    )


def theoretical_rate(cfg: dict) -> Optional[float]:
    """Rate ``v(beta, rho)`` for the configured pair in poly mode, else ``None``."""
    from .rates import rate_v

    p = coupling_params(cfg)
    if p["mode"] != "poly":
        return None
    return rate_v(p["beta"], p["rho"])[0]
