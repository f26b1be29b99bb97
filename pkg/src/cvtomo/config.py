"""Key-value config text used by the command-line tools.

The format is deliberately small: one ``key = value`` pair per line, blank
lines and ``#`` comments ignored.  State descriptions use the fixed key set
kind, lambda, alpha_re, alpha_im, r, n, coeffs, purity_low, purity_high,
seed, n_c; campaign files add orchestration keys on top (see
:mod:`cvtomo.bench`).
"""

from __future__ import annotations

from .errors import ValidationError
from .fock import StateSpec

STATE_KEYS = (
    "kind",
    "lambda",
    "alpha_re",
    "alpha_im",
    "r",
    "n",
    "coeffs",
    "purity_low",
    "purity_high",
    "seed",
    "n_c",
)


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a dict; duplicate keys are rejected."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValidationError(f"config line {lineno}: empty key")
        if key in out:
            raise ValidationError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def format_kv(pairs) -> str:
    return "".join(f"{key} = {value}\n" for key, value in pairs)


def coerce_int(value: str, key: str) -> int:
    # Accept scientific notation ("1e9") as long as the value is integral.
    try:
        f = float(value)
    except ValueError:
        raise ValidationError(f"{key}: expected an integer, got {value!r}") from None
    i = int(round(f))
    if f != i:
        raise ValidationError(f"{key}: expected an integer, got {value!r}")
    return i


def coerce_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"{key}: expected a number, got {value!r}") from None


def coerce_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValidationError(f"{key}: expected true/false, got {value!r}")


def coerce_complex(value: str, key: str) -> complex:
    try:
        return complex(value.replace(" ", ""))
    except ValueError:
        raise ValidationError(f"{key}: expected a complex number, got {value!r}") from None


def coerce_int_list(value: str, key: str) -> tuple[int, ...]:
    parts = [p for p in value.replace(",", " ").split() if p]
    if not parts:
        raise ValidationError(f"{key}: expected at least one integer")
    return tuple(coerce_int(p, key) for p in parts)


def _format_complex(z: complex) -> str:
    if z.imag == 0.0:
        return repr(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


def state_to_kv(spec: StateSpec) -> list[tuple[str, str]]:
    """Pairs describing ``spec``; only keys the kind uses are emitted."""
    pairs = [("kind", spec.kind), ("n_c", str(spec.n_c))]
    if spec.kind == "thermal":
        pairs.append(("lambda", repr(spec.lam)))
    elif spec.kind == "coherent":
        pairs.append(("alpha_re", repr(spec.alpha.real)))
        pairs.append(("alpha_im", repr(spec.alpha.imag)))
    elif spec.kind == "squeezed_vacuum":
        pairs.append(("r", repr(spec.r)))
    elif spec.kind == "fock":
        pairs.append(("n", str(spec.n)))
    elif spec.kind == "superposition":
        pairs.append(("coeffs", ", ".join(_format_complex(c) for c in spec.coeffs)))
    elif spec.kind == "random_mixed":
        pairs.append(("purity_low", repr(spec.purity_low)))
        pairs.append(("purity_high", repr(spec.purity_high)))
        pairs.append(("seed", str(spec.seed)))
    return pairs


def state_config_text(spec: StateSpec) -> str:
    return format_kv(state_to_kv(spec))


def state_from_kv(kv: dict[str, str]) -> StateSpec:
    """Build a StateSpec from parsed config pairs.

    Unknown keys are rejected so typos do not silently fall back to
    defaults; campaign parsing strips its own keys before calling this.
    """
    unknown = sorted(set(kv) - set(STATE_KEYS))
    if unknown:
        raise ValidationError(f"unknown state config keys: {', '.join(unknown)}")
    if "kind" not in kv:
        raise ValidationError("state config needs a 'kind' key")
    kind = kv["kind"]
    n_c = coerce_int(kv["n_c"], "n_c") if "n_c" in kv else 10

    alpha = None
    if "alpha_re" in kv or "alpha_im" in kv:
        alpha = complex(
            coerce_float(kv.get("alpha_re", "0"), "alpha_re"),
            coerce_float(kv.get("alpha_im", "0"), "alpha_im"),
        )
    coeffs = None
    if "coeffs" in kv:
        parts = [p for p in kv["coeffs"].replace(",", " ").split() if p]
        coeffs = tuple(coerce_complex(p, "coeffs") for p in parts)

    return StateSpec(
        kind=kind,
        n_c=n_c,
        lam=coerce_float(kv["lambda"], "lambda") if "lambda" in kv else None,
        alpha=alpha,
        r=coerce_float(kv["r"], "r") if "r" in kv else None,
        n=coerce_int(kv["n"], "n") if "n" in kv else None,
        coeffs=coeffs,
        purity_low=coerce_float(kv["purity_low"], "purity_low") if "purity_low" in kv else None,
        purity_high=coerce_float(kv["purity_high"], "purity_high") if "purity_high" in kv else None,
        seed=coerce_int(kv["seed"], "seed") if "seed" in kv else None,
    )


def state_from_config(text: str) -> StateSpec:
    return state_from_kv(parse_kv(text))
