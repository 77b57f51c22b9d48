"""Plain-text ``key = value`` documents.

One key per line, ``#`` starts a comment, matrix entries are whitespace or
comma separated in row-major order.  Model files use the keys
``n, L, phi, omega_half, a, theta, s``::

    n = 2
    L = 1
    phi = 0.3 0 0 0.7
    omega_half = 1 1 0 2
    a = 1 1
    theta = 0.0916290731874155
    s = 1
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .model_core import ModelParams, SRParams, ULRParams

MODEL_KEYS = ("n", "L", "phi", "omega_half", "a", "theta", "s")


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def floats(value: str) -> list[float]:
    return [float(tok) for tok in value.replace(",", " ").split()]


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def params_from_kv(kv: dict[str, str]) -> ModelParams:
    missing = [k for k in MODEL_KEYS if k not in kv]
    if missing:
        raise ValueError(f"missing model keys: {', '.join(missing)}")
    n, L = int(kv["n"]), int(kv["L"])

    def mat(key, rows, cols):
        vals = floats(kv[key])
        if len(vals) != rows * cols:
            raise ValueError(f"{key}: expected {rows * cols} entries, got {len(vals)}")
        return np.array(vals).reshape(rows, cols)

    return ModelParams(
        SRParams(mat("phi", n, n), mat("omega_half", n, n)),
        ULRParams(mat("theta", L, L), mat("s", L, L), mat("a", n, L)),
    )


def params_to_kv(params: ModelParams) -> dict[str, str]:
    return {
        "n": str(params.n),
        "L": str(params.L),
        "phi": _fmt(params.sr.phi),
        "omega_half": _fmt(params.sr.omega_half),
        "a": _fmt(params.ulr.a_mat),
        "theta": _fmt(params.ulr.theta),
        "s": _fmt(params.ulr.s_mat),
    }


def format_kv(kv: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in kv.items())


def load_params(path) -> ModelParams:
    return params_from_kv(parse_kv(Path(path).read_text()))


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(format_kv(params_to_kv(params)))
