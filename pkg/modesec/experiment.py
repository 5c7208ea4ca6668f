"""
Experiment configuration.

ExperimentConfig is the validated form of the INI configuration (see modesec.ini). Every section
is a pydantic model. Validation happens once, before any computation, and failures are reported
as ConfigException naming the section and option.

The build_* functions turn a validated configuration into the objects the analysis works on.
"""

import configparser
import logging
import os
from dataclasses import dataclass
from typing import Literal, Optional

from channel import LinkConfig, TapProfile, TapScheme, build_tap_matrix, random_tap_profile
from fiber import FiberSpec, GridSpec, ModeBasis, solve_modes
from matrix import PAPER_DEFAULT, MatrixException, coupled_unitary, haar_unitary, load_matrix, validate_alpha_rule
from pydantic import BaseModel, ValidationError, confloat, conint, root_validator, validator
from util import SEED_MASK, atomic_write

# Logging setup
logger = logging.getLogger("experiment")

Seed64 = conint(ge=0, le=SEED_MASK)
Rate = confloat(ge=0.0, le=1.0)
Positive = confloat(gt=0.0)


# ---------------------------
# Exceptions
# ---------------------------
@dataclass
class ConfigException(Exception):
    value: str


def _split_list(cls, value):
    if isinstance(value, str):
        return [v.strip() for v in value.replace(";", ",").split(",") if v.strip() != ""]
    return value


def _blank_none(cls, value):
    if isinstance(value, str) and value.strip() == "":
        return None
    return value


# ---------------------------
# Sections
# ---------------------------
class FiberSection(BaseModel):
    core_radius: Positive = 12.5e-6
    numerical_aperture: Positive = 0.1
    wavelength: Positive = 532e-9
    core_index: Positive = 1.46
    grid_points: conint(ge=2) = 512
    grid_extent: Positive = 1.5
    radial_points: conint(ge=3) = 4096
    radial_extent: confloat(ge=3.0) = 3.0

    @root_validator(skip_on_failure=True)
    def aperture_below_index(cls, values):
        if values["numerical_aperture"] >= values["core_index"]:
            raise ValueError("numerical_aperture must be below core_index")
        return values


class MatrixSection(BaseModel):
    source: Literal["haar", "coupled", "file"] = "haar"
    epsilon: confloat(ge=0.0) = 1.0
    seed: Seed64 = 1
    path: Optional[str] = None
    eve_source: Literal["same", "haar", "file"] = "same"
    eve_seed: Seed64 = 2
    eve_path: Optional[str] = None

    _blank = validator("path", "eve_path", pre=True, allow_reuse=True)(_blank_none)

    @validator("path", "eve_path")
    def file_exists(cls, value):
        if value is not None and not os.path.isfile(value):
            raise ValueError(f"file {value} does not exist")
        return value

    @root_validator(skip_on_failure=True)
    def paths_given(cls, values):
        if values["source"] == "file" and values.get("path") is None:
            raise ValueError("path is required when source = file")
        if values["eve_source"] == "file" and values.get("eve_path") is None:
            raise ValueError("eve_path is required when eve_source = file")
        return values


class TapSection(BaseModel):
    scheme: Literal["edge", "linear", "log", "none"] = "edge"
    rho: Rate = 0.8
    sigma_sq_min: confloat(gt=0.0, lt=1.0) = 0.0028
    seed: Seed64 = 3


class LinkSection(BaseModel):
    receiver_noise_std: confloat(ge=0.0) = 0.05
    alpha_rule: str = PAPER_DEFAULT
    noise_scaling: Literal["entry", "vector"] = "entry"

    @validator("alpha_rule")
    def alpha_rule_valid(cls, value):
        try:
            validate_alpha_rule(value)
        except MatrixException as e:
            raise ValueError(e.value)
        return value


class AnalysisSection(BaseModel):
    rng: Literal["PCG64", "Philox"] = "PCG64"
    snr_cap_db: Positive = 200.0


class SweepSection(BaseModel):
    noise_levels: list[Rate] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    trials: conint(ge=1) = 200
    seed: Seed64 = 1
    n_jobs: int = 1
    svg: bool = True

    _split = validator("noise_levels", pre=True, allow_reuse=True)(_split_list)

    @validator("noise_levels")
    def ascending(cls, value):
        if not value:
            raise ValueError("noise level grid is empty")
        if any(b <= a for a, b in zip(value[:-1], value[1:])):
            raise ValueError("noise levels must be strictly ascending")
        return value


class SecureSection(BaseModel):
    noise_level: Rate = 0.5
    eve_fail_min: Rate = 0.99
    bob_success_min: Rate = 0.99


class MdmSection(BaseModel):
    channels: list[conint(ge=1)] = [1, 6, 50]
    bits: Optional[str] = None
    eve_success_max: Rate = 0.05
    bob_success_min: Rate = 0.95

    _blank = validator("bits", pre=True, allow_reuse=True)(_blank_none)

    _split = validator("channels", pre=True, allow_reuse=True)(_split_list)

    @validator("channels")
    def distinct(cls, value):
        if not value:
            raise ValueError("no channels given")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate channels in {value}")
        return value

    @root_validator(skip_on_failure=True)
    def bits_match(cls, values):
        bits = values.get("bits")
        if bits is not None:
            if len(bits) != len(values["channels"]) or set(bits) - {"0", "1"}:
                raise ValueError(f"bits {bits} must be one 0/1 per channel")
            if "1" not in bits:
                raise ValueError("bits must activate at least one channel")
        return values

    def active_channels(self) -> list[int]:
        """One-based channels whose bit is 1 (all channels when no bits are given)"""
        if self.bits is None:
            return list(self.channels)
        return [c for c, bit in zip(self.channels, self.bits) if bit == "1"]


class OutputSection(BaseModel):
    dir: str = "out"


class ExperimentConfig(BaseModel):
    fiber: FiberSection = FiberSection()
    matrix: MatrixSection = MatrixSection()
    tap: TapSection = TapSection()
    link: LinkSection = LinkSection()
    analysis: AnalysisSection = AnalysisSection()
    sweep: SweepSection = SweepSection()
    secure: SecureSection = SecureSection()
    mdm: MdmSection = MdmSection()
    output: OutputSection = OutputSection()

    @staticmethod
    def from_config(parser: configparser.ConfigParser, overrides: dict | None = None) -> "ExperimentConfig":
        """Validated configuration from a parsed INI.

        overrides maps (section, option) to a value replacing the INI value.

        :raises:
        ConfigException: Naming the first offending section.option.
        """
        sections = {}
        for name in ExperimentConfig.__fields__:
            if parser.has_section(name):
                sections[name] = dict(parser.items(name))
        for (section, option), value in (overrides or {}).items():
            if value is not None:
                sections.setdefault(section, {})[option] = value
        try:
            return ExperimentConfig(**sections)
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"] if part != "__root__")
            message = f"Invalid configuration {location}: {first['msg']}"
            logger.error(message)
            raise ConfigException(message)

    def to_config(self) -> configparser.ConfigParser:
        parser = configparser.ConfigParser()
        for name, section in self.dict().items():
            parser[name] = {
                option: ", ".join(str(v) for v in value) if isinstance(value, list) else str(value)
                for option, value in section.items()
                if value is not None
            }
        return parser

    def to_ini(self, path: str) -> None:
        """Writes the configuration (after overrides) as INI, readable by from_config"""
        with atomic_write(path) as file:
            self.to_config().write(file)


# ---------------------------
# Builders
# ---------------------------
def fiber_spec(cfg: ExperimentConfig) -> FiberSpec:
    return FiberSpec(
        core_radius=cfg.fiber.core_radius,
        numerical_aperture=cfg.fiber.numerical_aperture,
        wavelength=cfg.fiber.wavelength,
        core_index=cfg.fiber.core_index,
    )


def grid_spec(cfg: ExperimentConfig) -> GridSpec:
    return GridSpec(
        points=cfg.fiber.grid_points,
        extent=cfg.fiber.grid_extent,
        radial_points=cfg.fiber.radial_points,
        radial_extent=cfg.fiber.radial_extent,
    )


def build_basis(cfg: ExperimentConfig) -> ModeBasis:
    return solve_modes(fiber_spec(cfg), grid_spec(cfg))


def _synthesize(source: str, n: int, epsilon: float, seed: int, path: str | None):
    if source == "file":
        m = load_matrix(path)
        if m.shape != (n, n):
            raise ConfigException(f"Matrix file {path} is {m.shape[0]}x{m.shape[1]}, mode basis has {n} modes")
        return m
    if source == "coupled":
        return coupled_unitary(n, epsilon, seed)
    return haar_unitary(n, seed)


def build_matrices(cfg: ExperimentConfig, n: int):
    """(T_AB, T_AE, independent) where independent tells whether T_AE differs from T_AB"""
    m = cfg.matrix
    t_ab = _synthesize(m.source, n, m.epsilon, m.seed, m.path)
    if m.eve_source == "same":
        return t_ab, t_ab, False
    return t_ab, _synthesize(m.eve_source, n, m.epsilon, m.eve_seed, m.eve_path), True


def build_tap(cfg: ExperimentConfig, basis: ModeBasis) -> TapProfile:
    t = cfg.tap
    if t.scheme == "none":
        return TapProfile.identity(len(basis))
    if t.scheme == TapScheme.edge:
        return build_tap_matrix(basis, t.rho, t.sigma_sq_min)
    return random_tap_profile(len(basis), t.scheme, t.sigma_sq_min, t.seed)


def build_link(cfg: ExperimentConfig, basis: ModeBasis | None = None) -> LinkConfig:
    """Complete link without artificial noise (sweeps set the level per cell)"""
    basis = basis if basis is not None else build_basis(cfg)
    t_ab, t_ae, _ = build_matrices(cfg, len(basis))
    link = LinkConfig(
        t_ab=t_ab,
        t_ae=t_ae,
        tap=build_tap(cfg, basis),
        receiver_noise_std=cfg.link.receiver_noise_std,
        alpha_rule=cfg.link.alpha_rule,
        noise_scaling=cfg.link.noise_scaling,
    )
    logger.info(
        f"Link: {link.n} modes, T_AB {cfg.matrix.source}, T_AE {cfg.matrix.eve_source}, tap {cfg.tap.scheme},"
        f" receiver noise {link.receiver_noise_std}, alpha {link.alpha_rule}"
    )
    return link


def one_based_channels(channels: list[int], n: int) -> list[int]:
    """Zero-based channel indices from one-based ones, checked against n"""
    bad = [c for c in channels if not 1 <= c <= n]
    if bad:
        raise ConfigException(f"Channels {bad} outside 1..{n}")
    return [c - 1 for c in channels]
