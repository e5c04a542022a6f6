"""Run configuration: JSON parsing, defaults and validation.

Validation collects every problem it finds and reports them together, each
prefixed with the key path it refers to.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .gaussian import model_from_dict
from .hermite import hermite_rank, preset

TOP_KEYS = {"model", "nonlinearity", "M", "K", "U", "experiment", "field", "y0", "seed", "out"}
EXPERIMENT_DEFAULTS = {
    "N": 512,
    "N_grid": [64, 128, 256, 512],
    "reps": 10_000,
    "windows": [[0.0, 1.0]],
    "words": [[1, 1]],
    "n": 1,
    "pairing": None,
    "blocks": None,
    "q": None,
    "max_total": 6,
    "delta": "model",
    "r": None,
    "d": 2,
    "L_grid": [1_000, 10_000, 100_000, 1_000_000],
    "p": 2.5,
    "steps": 4096,
    "ratio": 0.25,
    "max_lag": 16,
}
PRESET_KEYS = {"kind", "q", "Q", "coeffs", "x", "y", "nodes"}
FIELD_KEYS = {"kind", "V0", "B", "b"}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    model: dict
    nonlinearity: list
    M: int
    K: int = 4
    U: int = 4096
    experiment: dict = field(default_factory=dict)
    field: dict = None
    y0: list = None
    seed: int = 0
    out: str = "out"

    def to_dict(self):
        d = {"model": self.model, "nonlinearity": self.nonlinearity, "M": self.M, "K": self.K, "U": self.U,
             "experiment": self.experiment, "seed": self.seed, "out": self.out}
        if self.field is not None:
            d["field"] = self.field
        if self.y0 is not None:
            d["y0"] = self.y0
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # parsed views

    def build_model(self):
        return model_from_dict(self.model)

    def build_series(self):
        return [preset(**p) for p in self.nonlinearity]


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _word(w):
    if isinstance(w, str):
        return [int(c) for c in w]
    return list(w)


def validate(raw):
    """Return a RunConfig with defaults filled, or raise ConfigError listing every problem."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    for k in sorted(set(raw) - TOP_KEYS):
        errors.append(f"config.{k}: unknown key")

    model, m = None, None
    if "model" not in raw:
        errors.append("config.model: missing")
    else:
        try:
            model = model_from_dict(raw["model"])
            m = model.m
        except (KeyError, TypeError, ValueError) as e:
            errors.append(f"config.model: {e}")

    nl = raw.get("nonlinearity", {"kind": "hermite", "q": 1})
    if isinstance(nl, dict):
        nl = [dict(nl) for _ in range(m or 1)]
    series, ranks = [], []
    if not isinstance(nl, list):
        errors.append("config.nonlinearity: must be an object or a list of objects")
        nl = []
    if m is not None and len(nl) != m:
        errors.append(f"config.nonlinearity: {len(nl)} presets for {m} components")
    for i, p in enumerate(nl):
        path = f"config.nonlinearity[{i}]"
        if not isinstance(p, dict):
            errors.append(f"{path}: must be an object")
            continue
        for k in sorted(set(p) - PRESET_KEYS):
            errors.append(f"{path}.{k}: unknown key")
        try:
            s = preset(**{k: v for k, v in p.items() if k in PRESET_KEYS})
            series.append(s)
            ranks.append(hermite_rank(s))
        except (TypeError, ValueError) as e:
            errors.append(f"{path}: {e}")

    Qmax = max((s.Q for s in series), default=1)
    M = raw.get("M", Qmax)
    if not _is_int(M) or M < 0:
        errors.append("config.M: must be a nonnegative integer")
    else:
        for i, d in enumerate(ranks):
            if M < d:
                errors.append(f"config.M: cutoff {M} is below the Hermite rank {d} of component {i}")
    K = raw.get("K", 4)
    if not _is_int(K) or not 1 <= K <= 6:
        errors.append("config.K: must be an integer in 1..6")
    U = raw.get("U", 4096)
    if not _is_int(U) or U < 1:
        errors.append("config.U: must be a positive integer")
    seed = raw.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        errors.append("config.seed: must be a nonnegative integer")
    out = raw.get("out", "out")
    if not isinstance(out, str):
        errors.append("config.out: must be a string")

    exp_raw = raw.get("experiment", {})
    exp = dict(EXPERIMENT_DEFAULTS)
    if not isinstance(exp_raw, dict):
        errors.append("config.experiment: must be an object")
        exp_raw = {}
    for k in sorted(set(exp_raw) - set(EXPERIMENT_DEFAULTS)):
        errors.append(f"config.experiment.{k}: unknown key")
    exp.update({k: v for k, v in exp_raw.items() if k in EXPERIMENT_DEFAULTS})
    errors += _check_experiment(exp, m)

    fld, y0 = raw.get("field"), raw.get("y0")
    if fld is not None:
        errors += _check_field(fld, m)
        n = np.shape(fld.get("V0", [])) if isinstance(fld, dict) else ()
        if y0 is not None and (len(n) != 2 or np.shape(y0) != (n[0],)):
            errors.append(f"config.y0: expected a vector of length {n[0] if len(n) == 2 else '?'}")
    elif y0 is not None:
        errors.append("config.y0: given without a field")

    if errors:
        raise ConfigError(errors)
    exp["words"] = [_word(w) for w in exp["words"]]
    return RunConfig(raw["model"], nl, M, K, U, exp, fld, y0, seed, out)


def _check_experiment(exp, m):
    errors = []
    pre = "config.experiment"
    for key in ("N", "reps", "n", "max_total", "steps", "max_lag", "d"):
        if not _is_int(exp[key]) or exp[key] < 1:
            errors.append(f"{pre}.{key}: must be a positive integer")
    if _is_int(exp["reps"]) and exp["reps"] < 2:
        errors.append(f"{pre}.reps: need at least 2 replications")
    for key in ("N_grid", "L_grid"):
        g = exp[key]
        if not isinstance(g, list) or not g or not all(_is_int(x) and x >= 1 for x in g):
            errors.append(f"{pre}.{key}: must be a nonempty list of positive integers")
        elif any(b <= a for a, b in zip(g, g[1:])):
            errors.append(f"{pre}.{key}: must be strictly increasing")
    wins = exp["windows"]
    if not isinstance(wins, list) or not wins:
        errors.append(f"{pre}.windows: must be a nonempty list of [s, t] pairs")
    else:
        for i, w in enumerate(wins):
            if not (isinstance(w, list) and len(w) == 2 and all(_is_num(x) for x in w) and 0 <= w[0] < w[1] <= 1):
                errors.append(f"{pre}.windows[{i}]: need 0 <= s < t <= 1")
    words = exp["words"]
    if not isinstance(words, list):
        errors.append(f"{pre}.words: must be a list")
    else:
        for i, w in enumerate(words):
            try:
                letters = _word(w)
            except (TypeError, ValueError):
                errors.append(f"{pre}.words[{i}]: not a word")
                continue
            if not all(_is_int(x) and x >= 1 for x in letters):
                errors.append(f"{pre}.words[{i}]: letters must be positive integers")
            elif m is not None and any(x > m for x in letters):
                errors.append(f"{pre}.words[{i}]: letter out of range for m = {m}")
    if exp["delta"] not in ("model", "kronecker"):
        errors.append(f"{pre}.delta: must be 'model' or 'kronecker'")
    if exp["r"] is not None and not (_is_num(exp["r"]) and 0 < exp["r"] < 0.5):
        errors.append(f"{pre}.r: must lie in (0, 1/2)")
    if not _is_num(exp["p"]) or exp["p"] <= 2:
        errors.append(f"{pre}.p: r-variation exponent must exceed 2")
    if not _is_num(exp["ratio"]) or not 0 < exp["ratio"] <= 1:
        errors.append(f"{pre}.ratio: must lie in (0, 1]")
    q = exp["q"]
    if q is not None and not (isinstance(q, list) and q and all(_is_int(x) and x >= 1 for x in q)):
        errors.append(f"{pre}.q: must be a list of positive integers")
    for key in ("pairing", "blocks"):
        v = exp[key]
        if v is not None and not (isinstance(v, list) and all(isinstance(p, list) for p in v)):
            errors.append(f"{pre}.{key}: must be a list of index lists")
    return errors


def _check_field(fld, m):
    errors = []
    if not isinstance(fld, dict):
        return ["config.field: must be an object"]
    for k in sorted(set(fld) - FIELD_KEYS):
        errors.append(f"config.field.{k}: unknown key")
    if fld.get("kind") not in ("constant", "affine", "bilinear"):
        errors.append("config.field.kind: must be constant, affine or bilinear")
    V0 = np.asarray(fld.get("V0", []), dtype=float)
    if V0.ndim != 2:
        errors.append("config.field.V0: must be an n x m matrix")
        return errors
    n, mm = V0.shape
    if m is not None and mm != m:
        errors.append(f"config.field.V0: has {mm} columns but the model has {m} components")
    if fld.get("B") is not None and np.shape(fld["B"]) != (n, mm, n):
        errors.append(f"config.field.B: expected shape {(n, mm, n)}")
    b = fld.get("b")
    if b is not None:
        if not isinstance(b, dict) or set(b) - {"b0", "b1"}:
            errors.append("config.field.b: must be an object with keys b0 and b1")
        else:
            if b.get("b0") is not None and np.shape(b["b0"]) != (n,):
                errors.append(f"config.field.b.b0: expected length {n}")
            if b.get("b1") is not None and np.shape(b["b1"]) != (n, n):
                errors.append(f"config.field.b.b1: expected shape {(n, n)}")
    return errors


def parse_config(path):
    """Read and validate a JSON config file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return validate(raw)
