"""Flat `key = value` run configuration with dotted section prefixes.

Every optimizer constant is settable from one file; unknown keys are
rejected so typos fail loudly. Distance-like values accept the literal
``auto`` to request the scale-relative default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .icp import TrimmedIcpConfig
from .motion import MpeConfig
from .multiview import MultiviewConfig
from .synth import PerturbationSpec


def _parse_bool(raw: str):
    if raw.lower() in ("true", "yes", "1", "on"):
        return True
    if raw.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_float(raw: str):
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError(f"not finite: {raw!r}")
    return v


def _auto_or(parser):
    def parse(raw: str):
        if raw.lower() in ("auto", "none"):
            return None
        return parser(raw)

    return parse


# key -> (target dataclass field path, parser)
_SCHEMA = {
    "mpe.eps2": _auto_or(_parse_float),
    "mpe.gravitational_constant": _parse_float,
    "mpe.initial_theta": _parse_float,
    "mpe.initial_step": _auto_or(_parse_float),
    "mpe.eps_r": _parse_float,
    "mpe.eps_t": _auto_or(_parse_float),
    "mpe.downsample_count": int,
    "mpe.max_iterations": int,
    "mpe.seed": int,
    "mpe.independent_halving": _parse_bool,
    "mpe.exit_on_both": _parse_bool,
    "icp.overlap_ratio": _parse_float,
    "icp.max_iterations": int,
    "icp.mse_rel_tol": _parse_float,
    "multiview.tau0": _parse_float,
    "multiview.overlap_dist": _auto_or(_parse_float),
    "multiview.merge_dedup_dist": _auto_or(_parse_float),
    "multiview.overlap_count": _auto_or(int),
    "perturb.gaussian_sigma": _parse_float,
    "perturb.outlier_count": int,
    "perturb.rotation_angle_min": _parse_float,
    "perturb.rotation_angle_max": _parse_float,
    "perturb.translation_min": _parse_float,
    "perturb.translation_max": _parse_float,
    "perturb.seed": int,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs: coarse stage, fine stage, multiview
    thresholds and the synthetic perturbation recipe."""

    mpe: MpeConfig
    icp: TrimmedIcpConfig
    multiview: MultiviewConfig
    perturb: PerturbationSpec

    @staticmethod
    def default() -> "RunConfig":
        mpe = MpeConfig()
        icp = TrimmedIcpConfig()
        return RunConfig(
            mpe=mpe,
            icp=icp,
            multiview=MultiviewConfig(mpe=mpe, icp=icp),
            perturb=PerturbationSpec(),
        )

    def with_seed(self, seed: int) -> "RunConfig":
        mpe = replace(self.mpe, seed=seed)
        return RunConfig(
            mpe=mpe,
            icp=self.icp,
            multiview=replace(self.multiview, mpe=mpe, icp=self.icp),
            perturb=replace(self.perturb, seed=seed),
        )


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text; raises ConfigError on unknown keys, bad values or
    violated invariants."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        try:
            values[key] = _SCHEMA[key](raw_value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{line_no}: bad value for {key}: {exc}") from None

    def section(prefix):
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in values.items() if k.startswith(prefix + ".")}

    perturb_kv = section("perturb")
    angle_min = perturb_kv.pop("rotation_angle_min", 0.0)
    angle_max = perturb_kv.pop("rotation_angle_max", math.pi / 2)
    trans_min = perturb_kv.pop("translation_min", 0.0)
    trans_max = perturb_kv.pop("translation_max", 0.0)
    try:
        mpe = MpeConfig(**section("mpe"))
        mpe.validate()
        icp = TrimmedIcpConfig(**section("icp"))
        multiview = MultiviewConfig(mpe=mpe, icp=icp, **section("multiview"))
        perturb = PerturbationSpec(
            rotation_angle_range=(angle_min, angle_max),
            translation_range=(trans_min, trans_max),
            **perturb_kv,
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(mpe=mpe, icp=icp, multiview=multiview, perturb=perturb)


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig.default()
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), source=str(path))


def config_template() -> str:
    """A commented config file listing every key at its default."""
    mpe = MpeConfig()
    icp = TrimmedIcpConfig()
    mv = MultiviewConfig(mpe=mpe, icp=icp)
    pt = PerturbationSpec()

    def show(v):
        if v is None:
            return "auto"
        if isinstance(v, bool):
            return "true" if v else "false"
        return repr(v)

    lines = ["# All keys at their defaults; 'auto' = scale-relative."]
    for f in fields(mpe):
        if f.name == "seed":
            lines.append(f"mpe.seed = {mpe.seed}")
        else:
            lines.append(f"mpe.{f.name} = {show(getattr(mpe, f.name))}")
    for f in fields(icp):
        lines.append(f"icp.{f.name} = {show(getattr(icp, f.name))}")
    for name in ("tau0", "overlap_dist", "merge_dedup_dist", "overlap_count"):
        lines.append(f"multiview.{name} = {show(getattr(mv, name))}")
    lines.append(f"perturb.gaussian_sigma = {show(pt.gaussian_sigma)}")
    lines.append(f"perturb.outlier_count = {show(pt.outlier_count)}")
    lines.append(f"perturb.rotation_angle_min = {show(pt.rotation_angle_range[0])}")
    lines.append(f"perturb.rotation_angle_max = {show(pt.rotation_angle_range[1])}")
    lines.append(f"perturb.translation_min = {show(pt.translation_range[0])}")
    lines.append(f"perturb.translation_max = {show(pt.translation_range[1])}")
    lines.append(f"perturb.seed = {pt.seed}")
    return "\n".join(lines) + "\n"
