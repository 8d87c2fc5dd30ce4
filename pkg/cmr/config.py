import os
from pathlib import Path
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Optional

import toml
import dotenv

from cmr.log import Log
from cmr.algebra import FieldSpec
from cmr.errors import ParameterError


class Config:
    def __init__(self):
        self.path = Path(os.getenv("CMR_CONFIG_DIR", "~/.config/cmr")).expanduser()
        self.dotenv_path = self.path / "config"
        self.logger = Log()
        self.keys_dict = {
            "field": {"name": "CMR_FIELD", "note": "default field for zigzag codes", "default": "gf256"},
            "seed": {"name": "CMR_SEED", "note": "default RNG seed", "default": "0"},
            "output_dir": {"name": "CMR_OUTPUT_DIR", "note": "where node files go", "default": "cmr-out"},
            "report_format": {"name": "CMR_REPORT_FORMAT", "note": "table or json", "default": "table"},
            "build_retries": {"name": "CMR_BUILD_RETRIES", "note": "zigzag coefficient draws", "default": "32"},
            "debug": {"name": "CMR_DEBUG", "note": "debug logging (true/false)", "default": "false"},
        }
        self.keys = [ele.get("name") for key, ele in self.keys_dict.items()]
        self.defaults = {ele.get("name"): ele.get("default") for key, ele in self.keys_dict.items()}
        if not self.check_exists():
            self.logger.debug(f"no config file at {self.dotenv_path}, using defaults")
        self.configs = self.get_configs()

    def load_env(self):
        dotenv.load_dotenv(dotenv_path=self.dotenv_path)

    def print_current_config(self):
        if self.dotenv_path.is_file():
            with self.dotenv_path.open() as f:
                print(f"Current configuration:\n{f.read()}")

    def get_configs(self) -> Dict[str, str]:
        if self.dotenv_path.is_file():
            self.load_env()
        return {key: os.getenv(key, self.defaults[key]) for key in self.keys}

    def get(self, key: str) -> str:
        if key not in self.defaults:
            raise ParameterError(f"unknown config key {key}")
        return self.configs.get(key) or self.defaults[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError as e:
            raise ParameterError(f"{key}={self.get(key)!r} is not an integer") from e

    def get_bool(self, key: str) -> bool:
        return self.get(key).strip().lower() in ("1", "true", "yes", "on")

    def check_exists(self):
        return self.dotenv_path.is_file()

    def write_env_vars(self, env_vars: dict):
        self.path.mkdir(parents=True, exist_ok=True)
        with self.dotenv_path.open(mode="a") as f:
            for key, value in env_vars.items():
                f.write(f"{key}={value}\n")


CODE_KINDS = ("zigzag", "mbcr", "rlnc", "secret")
SECRET_KINDS = {"msmr": "msmr-zigzag", "msmr-zigzag": "msmr-zigzag", "mbmr": "mbmr-bivariate", "mbmr-bivariate": "mbmr-bivariate"}
REPORT_FORMATS = ("table", "json")


@dataclass(frozen=True)
class JobConfig:
    """One invocation: what to run, on which parameters, and where the files go"""

    command: str
    code: str = "zigzag"
    n: Optional[int] = None
    k: Optional[int] = None
    d: Optional[int] = None
    t: Optional[int] = None
    z: Optional[int] = None
    kind: Optional[str] = None
    field: Optional[FieldSpec] = None
    seed: int = 0
    input: Optional[Path] = None
    output: Optional[Path] = None
    report_format: str = "table"

    @property
    def r(self) -> Optional[int]:
        if self.n is None or self.k is None:
            return None
        return self.n - self.k

    @property
    def scheme(self) -> Optional[str]:
        return SECRET_KINDS.get(self.kind) if self.kind else None

    def merged(self, overrides: Dict[str, Any]) -> "JobConfig":
        """Copy with every non-None override applied"""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ParameterError(f"unknown job keys: {sorted(unknown)}")
        values = {key: value for key, value in overrides.items() if value is not None}
        if isinstance(values.get("field"), str):
            values["field"] = FieldSpec.parse(values["field"])
        for key in ("input", "output"):
            if isinstance(values.get(key), str):
                values[key] = Path(values[key])
        return replace(self, **values)

    @classmethod
    def from_toml(
        cls, path, overrides: Optional[Dict[str, Any]] = None, base: Optional["JobConfig"] = None
    ) -> "JobConfig":
        """
        Loads a flat TOML job file on top of base; non-None overrides win

        Example:
            command = "encode"
            code = "zigzag"
            n = 6
            k = 3
            field = "gf256"
        """
        path = Path(path)
        if not path.is_file():
            raise ParameterError(f"job file {path.name} not found")
        try:
            data = toml.load(path)
        except toml.TomlDecodeError as e:
            raise ParameterError(f"job file {path.name}: {e}") from e
        overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
        command = overrides.pop("command", None) or data.pop("command", None) or (base.command if base else None)
        if not command:
            raise ParameterError("job file names no command")
        data.pop("command", None)
        start = replace(base, command=command) if base else cls(command=command)
        return start.merged(data).merged(overrides)

    def validate(self) -> "JobConfig":
        if self.code not in CODE_KINDS:
            raise ParameterError(f"unknown code kind {self.code!r}; expected one of {CODE_KINDS}")
        if self.report_format not in REPORT_FORMATS:
            raise ParameterError(f"report format must be one of {REPORT_FORMATS}")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if self.code == "zigzag":
            self._require("n", "k")
            if self.k < 2 or self.r < 2:
                raise ParameterError(f"zigzag needs k >= 2 and n-k >= 2, got n={self.n}, k={self.k}")
            if self.t is not None and not 1 <= self.t <= min(3, self.r):
                raise ParameterError(f"t={self.t} outside [1, min(3, n-k={self.r})]")
        elif self.code in ("mbcr", "rlnc"):
            self._require("n", "k", "d", "t")
            if min(self.k, self.t) < 1 or self.k > self.d or self.d > self.n - self.t:
                raise ParameterError(f"need 1 <= k <= d <= n-t, got n={self.n}, k={self.k}, d={self.d}, t={self.t}")
        else:
            if self.scheme is None:
                raise ParameterError(f"secret kind must be msmr or mbmr, got {self.kind!r}")
            self._require("n", "z", "t")
            if self.z < 0 or self.t < 1:
                raise ParameterError("need z >= 0 and t >= 1")
            if self.scheme == "msmr-zigzag":
                r = self.n - self.z - self.t
                if r < 2 or self.t > min(3, r):
                    raise ParameterError(f"msmr scheme needs n-z-t >= max(2, t), got n={self.n}")
            else:
                self._require("d")
                if not self.z + self.t <= self.d <= self.n - self.t:
                    raise ParameterError(f"mbmr scheme needs z+t <= d <= n-t, got d={self.d}")
        return self

    def _require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ParameterError(f"{self.code} {self.command} needs --{' --'.join(missing)}")
