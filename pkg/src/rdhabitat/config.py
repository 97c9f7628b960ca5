"""Experiment configuration: flat key-value text, parse/emit round-trip.

The format is one `section.key = value` pair per line, `#` comments, blank
lines ignored.  Every emit materializes all resolved values (including
defaults), so any artifact carrying an emitted config block is reproducible
without knowing the defaults of the version that wrote it.  emit_config and
parse_config are exact inverses on ExperimentConfig values.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace

from .domain import DomainSpec, Rect, Region
from .errors import ConfigError
from .kinetics import KineticParams
from .linstab import DiffusionPair
from .solver import FillMode, SimConfig

ENV_OUT_DIR = "RDHABITAT_OUT"

_PARAM_KEYS = ("r", "f", "m", "b", "c", "q", "p", "s", "a")

_DEFAULTS = {
    "params.r": "1.0", "params.f": "0.1", "params.m": "0.1", "params.b": "0.9",
    "params.c": "1.0", "params.q": "0.35", "params.p": "0.0425",
    "params.s": "3.0", "params.a": "1.65",
    "diffusion.d1": "0.15", "diffusion.d2": "10.0",
    "domain": "square L=100",
    "grid.h": "1.0",
    "sim.t_end": "3000.0",
    "sim.dt": "auto",
    "sim.snapshot_every": "50.0",
    "sim.series_every": "0.5",
    "sim.seed": "0",
    "sim.safety": "0.8",
    "sim.stationarity_tol": "1e-06",
    "sim.check_after": "0.0",
    "ic.kind": "noise",
    "ic.region": "all",
    "ic.epsilon": "0.01",
    "outputs.dir": "out",
}

_REGION_NAMES = {"all": Region.ALL, "d1": Region.D1}
_FILL_NAMES = {"zero": FillMode.ZERO, "homogeneous": FillMode.HOMOGENEOUS}


class ICKind(enum.Enum):
    NOISE = "noise"
    SNAPSHOT = "snapshot"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one command needs, resolved; the domain stays textual.

    The domain is kept as its canonical preset string and parsed on demand:
    the string is the serialized form, so textual identity gives round-trip
    identity without reconstructing preset names from rectangle lists.
    """

    params: KineticParams
    diffusion: DiffusionPair
    domain: str
    h: float
    sim: SimConfig
    stationarity_tol: float
    check_after: float
    ic_kind: ICKind
    ic_region: Region
    ic_snapshot: str | None
    ic_fill: FillMode | None
    out_dir: str

    def domain_spec(self) -> DomainSpec:
        return parse_domain(self.domain)

    def with_(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


def parse_domain(text: str) -> DomainSpec:
    """Parse a domain preset: `square L=..`, `ushape L2=.. ...` or `rects (..) ..`."""
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty domain specification")
    kind, args = tokens[0], tokens[1:]
    try:
        if kind == "square":
            kv = _keyword_args(args, ("L",), text)
            return DomainSpec.square(kv["L"])
        if kind == "ushape":
            kv = _keyword_args(args, ("L2", "Lx1", "Lx2", "Lx3", "Ly"), text)
            return DomainSpec.ushape(**kv)
        if kind == "rects":
            rects = []
            for tok in args:
                m = re.fullmatch(r"\(([^)]*)\)", tok)
                if not m:
                    raise ConfigError(f"bad rectangle token {tok!r} in domain {text!r}")
                parts = m.group(1).split(",")
                if len(parts) != 4:
                    raise ConfigError(f"rectangle needs 4 coordinates, got {tok!r}")
                try:
                    x0, y0, x1, y1 = (float(s) for s in parts)
                except ValueError as exc:
                    raise ConfigError(f"bad rectangle coordinates in {tok!r}") from exc
                rects.append(Rect(x0, y0, x1, y1))
            if not rects:
                raise ConfigError("domain 'rects' needs at least one rectangle")
            return DomainSpec.rect_union(rects)
    except ValueError as exc:
        # geometry constructors validate with ValueError; here the bad value
        # came from config text, so surface it as a config problem
        raise ConfigError(f"domain {text!r}: {exc}") from exc
    raise ConfigError(f"unknown domain kind {kind!r} (square, ushape or rects)")


def _keyword_args(args: list[str], names: tuple[str, ...], text: str) -> dict:
    kv = {}
    for tok in args:
        if "=" not in tok:
            raise ConfigError(f"expected name=value, got {tok!r} in domain {text!r}")
        name, _, val = tok.partition("=")
        if name not in names:
            raise ConfigError(f"unknown domain argument {name!r} in {text!r}")
        try:
            kv[name] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad number {val!r} for {name!r} in domain {text!r}") from exc
    missing = [n for n in names if n not in kv]
    if missing:
        raise ConfigError(f"domain {text!r} is missing {', '.join(missing)}")
    return kv


def _fmt(value: float) -> str:
    return repr(float(value))


def parse_pairs(text: str) -> dict[str, str]:
    """Raw key-value lines of a config (or embedded config block) as a dict."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _to_float(pairs: dict[str, str], key: str) -> float:
    try:
        return float(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {pairs[key]!r}") from exc


def _to_int(pairs: dict[str, str], key: str) -> int:
    try:
        return int(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {pairs[key]!r}") from exc


def from_pairs(pairs: dict[str, str]) -> ExperimentConfig:
    """Build a resolved config from raw pairs; unknown keys are errors."""
    known = set(_DEFAULTS) | {"ic.snapshot", "ic.fill"}
    unknown = sorted(set(pairs) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(_DEFAULTS)
    merged.update(pairs)

    params = KineticParams(**{k: _to_float(merged, f"params.{k}") for k in _PARAM_KEYS})
    diffusion = DiffusionPair(_to_float(merged, "diffusion.d1"),
                              _to_float(merged, "diffusion.d2"))
    domain = merged["domain"]
    parse_domain(domain)  # validate now, fail with the config context
    h = _to_float(merged, "grid.h")
    if not h > 0:
        raise ConfigError(f"grid.h must be positive, got {h}")

    dt_text = merged["sim.dt"]
    dt = None if dt_text == "auto" else _to_float(merged, "sim.dt")
    sim = SimConfig(
        t_end=_to_float(merged, "sim.t_end"),
        dt=dt,
        snapshot_every=_to_float(merged, "sim.snapshot_every"),
        series_every=_to_float(merged, "sim.series_every"),
        seed=_to_int(merged, "sim.seed"),
        epsilon=_to_float(merged, "ic.epsilon"),
        safety=_to_float(merged, "sim.safety"),
    )
    stationarity_tol = _to_float(merged, "sim.stationarity_tol")
    check_after = _to_float(merged, "sim.check_after")
    if stationarity_tol < 0:
        raise ConfigError(f"sim.stationarity_tol must be non-negative, got {stationarity_tol}")
    if check_after < 0:
        raise ConfigError(f"sim.check_after must be non-negative, got {check_after}")

    kind_text = merged["ic.kind"]
    try:
        ic_kind = ICKind(kind_text)
    except ValueError as exc:
        raise ConfigError(f"ic.kind must be noise or snapshot, got {kind_text!r}") from exc
    region_text = merged["ic.region"]
    if region_text not in _REGION_NAMES:
        raise ConfigError(f"ic.region must be all or d1, got {region_text!r}")
    ic_region = _REGION_NAMES[region_text]

    ic_snapshot = merged.get("ic.snapshot")
    ic_fill = None
    if "ic.fill" in merged:
        fill_text = merged["ic.fill"]
        if fill_text not in _FILL_NAMES:
            raise ConfigError(f"ic.fill must be zero or homogeneous, got {fill_text!r}")
        ic_fill = _FILL_NAMES[fill_text]
    if ic_kind is ICKind.SNAPSHOT:
        if ic_snapshot is None:
            raise ConfigError("ic.kind = snapshot requires ic.snapshot = <path>")
        if ic_fill is None:
            raise ConfigError("ic.kind = snapshot requires ic.fill = zero|homogeneous")

    return ExperimentConfig(
        params=params, diffusion=diffusion, domain=domain, h=h, sim=sim,
        stationarity_tol=stationarity_tol, check_after=check_after,
        ic_kind=ic_kind, ic_region=ic_region,
        ic_snapshot=ic_snapshot, ic_fill=ic_fill,
        out_dir=merged["outputs.dir"],
    )


def parse_config(text: str) -> ExperimentConfig:
    return from_pairs(parse_pairs(text))


def resolved_pairs(cfg: ExperimentConfig, include_outputs: bool = True) -> list[tuple[str, str]]:
    """Canonical (key, value) list; artifact headers drop the outputs section.

    outputs.dir names where files land on one machine; it is excluded from
    embedded headers so rerunning the same experiment into a different
    directory yields byte-identical artifacts.
    """
    pairs = [(f"params.{k}", _fmt(getattr(cfg.params, k))) for k in _PARAM_KEYS]
    pairs += [
        ("diffusion.d1", _fmt(cfg.diffusion.d1)),
        ("diffusion.d2", _fmt(cfg.diffusion.d2)),
        ("domain", cfg.domain),
        ("grid.h", _fmt(cfg.h)),
        ("sim.t_end", _fmt(cfg.sim.t_end)),
        ("sim.dt", "auto" if cfg.sim.dt is None else _fmt(cfg.sim.dt)),
        ("sim.snapshot_every", _fmt(cfg.sim.snapshot_every)),
        ("sim.series_every", _fmt(cfg.sim.series_every)),
        ("sim.seed", str(cfg.sim.seed)),
        ("sim.safety", _fmt(cfg.sim.safety)),
        ("sim.stationarity_tol", _fmt(cfg.stationarity_tol)),
        ("sim.check_after", _fmt(cfg.check_after)),
        ("ic.kind", cfg.ic_kind.value),
        ("ic.region", cfg.ic_region.name.lower()),
        ("ic.epsilon", _fmt(cfg.sim.epsilon)),
    ]
    if cfg.ic_snapshot is not None:
        pairs.append(("ic.snapshot", cfg.ic_snapshot))
    if cfg.ic_fill is not None:
        pairs.append(("ic.fill", cfg.ic_fill.name.lower()))
    if include_outputs:
        pairs.append(("outputs.dir", cfg.out_dir))
    return pairs


def emit_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in resolved_pairs(cfg))


def apply_overrides(pairs: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Apply `key=value` strings (e.g. from --set flags) onto parsed pairs."""
    out = dict(pairs)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"override with empty key: {item!r}")
        out[key] = value
    return out
