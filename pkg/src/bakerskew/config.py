"""Run configuration: flat key-value files and scenario presets.

The file format is one `key = value` per line, `#` comments, with string,
number or boolean values; lists are comma-separated, fibre anchors are
semicolon-separated xi,x,y triples.  The seed is mandatory: every scenario
must be reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

_LIST_KEYS = {"traj_y0", "dim_phihat"}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    r: float = 1.1
    eps: float = 0.0
    a: float = 0.5
    m_bound: float = 0.86
    i_lo: float = -0.858
    i_hi: float = 0.858
    cert_grid: int = 1000
    nx: int = 4096
    depth: int = 200
    middle_anchor: float = 0.0
    middle_seed: int = 0
    traj_steps: int = 10_000_000
    burn_in: int = 1000
    traj_y0: tuple = (-1.0,)
    traj_rows_cap: int = 200_000
    levelset_nx: int = 512
    levelset_ny: int = 512
    levelset_ylo: float = -1.0
    levelset_yhi: float = 1.0
    fibre_anchors: tuple = (
        (0.15, 0.5, 0.55),
        (0.4, 0.5, 0.65),
        (0.65, 0.5, -0.55),
        (0.9, 0.5, -0.65),
    )
    fibre_step: float = 1e-4
    max_period: int = 2
    pinch_tol: float = 1e-3
    band: float = 0.3
    measure_samples: int = 50_000
    dim_order: int = 10
    dim_phihat: tuple = ("upper", "lower", "middle")
    override_certificate: bool = False

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError("a must lie in (0,1)")
        if self.r <= 0 or self.eps < 0:
            raise ValueError("need r > 0 and eps >= 0")
        if not self.i_lo < self.i_hi:
            raise ValueError("need i_lo < i_hi")
        if self.m_bound <= 0 or self.i_hi >= self.m_bound or self.i_lo <= -self.m_bound:
            raise ValueError("need I inside (-M, M)")
        if self.nx < 16 or self.depth < 1 or self.traj_steps < 1:
            raise ValueError("grid sizes, depth and trajectory length must be positive")
        if self.burn_in >= self.traj_steps:
            raise ValueError("burn-in must be shorter than the trajectory")
        if self.fibre_step > 1e-3:
            raise ValueError("fibre step must be <= 1e-3")
        for kind in self.dim_phihat:
            if kind not in ("upper", "lower", "middle"):
                raise ValueError(f"unknown phi-hat kind {kind!r}")

    @property
    def J(self) -> tuple[float, float]:
        return (-self.m_bound, self.m_bound)

    @property
    def I(self) -> tuple[float, float]:
        return (self.i_lo, self.i_hi)


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "fibre_anchors":
        triples = []
        for part in raw.split(";"):
            part = part.strip()
            if not part:
                continue
            nums = [float(v) for v in part.split(",")]
            if len(nums) != 3:
                raise ValueError(f"fibre anchor needs xi,x,y: {part!r}")
            triples.append(tuple(nums))
        return tuple(triples)
    if key in _LIST_KEYS:
        items = [v.strip() for v in raw.split(",") if v.strip()]
        if key == "dim_phihat":
            return tuple(items)
        return tuple(float(v) for v in items)
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        out[key.strip()] = _parse_value(key.strip(), raw)
    return out


def load_config(path: str, overrides: dict | None = None) -> ScenarioConfig:
    with open(path) as fh:
        data = parse_config_text(fh.read())
    if overrides:
        data.update(overrides)
    return config_from_dict(data)


def config_from_dict(data: dict) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in data:
        raise ValueError("seed is mandatory (reproducibility)")
    if "scenario" not in data:
        data = {"scenario": "custom", **data}
    coerced = {}
    for f in fields(ScenarioConfig):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name in ("traj_y0", "dim_phihat", "fibre_anchors") and isinstance(value, str):
            value = _parse_value(f.name, value)
        coerced[f.name] = value
    return ScenarioConfig(**coerced)


def dump_config(cfg: ScenarioConfig) -> str:
    """Canonical key = value text (sorted keys), suitable for the echo file."""
    lines = []
    for f in sorted(fields(ScenarioConfig), key=lambda f: f.name):
        value = getattr(cfg, f.name)
        if f.name == "fibre_anchors":
            value = "; ".join(",".join(repr(float(v)) for v in t) for t in value)
        elif isinstance(value, tuple):
            value = ",".join(
                v if isinstance(v, str) else repr(float(v)) for v in value
            )
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


_PRESETS: dict[str, dict] = {
    "fig1a": dict(scenario="fig1a", eps=0.018, traj_y0=(-1.0, 1.0), seed=20260810),
    "fig1b": dict(scenario="fig1b", eps=0.019, traj_y0=(-1.0, 1.0), seed=20260810),
    "fig1c": dict(scenario="fig1c", eps=0.04, traj_y0=(-1.0,), seed=20260810),
    "fig2": dict(scenario="fig2", eps=0.08, traj_y0=(-1.0,), seed=20260810),
    "example23": dict(scenario="example23", eps=0.1, seed=20260810),
}


def preset_config(name: str, overrides: dict | None = None) -> ScenarioConfig:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; have {sorted(_PRESETS)}")
    data = dict(_PRESETS[name])
    if overrides:
        data.update(overrides)
    return config_from_dict(data)


def preset_names() -> list[str]:
    return sorted(_PRESETS)
