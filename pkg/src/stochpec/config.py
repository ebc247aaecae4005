"""INI-style pipeline configuration with per-section defaults."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

STAGES = ("generate", "infer", "synthesize", "simulate", "mitigate", "report")

# sections whose values each stage's outputs depend on (cumulative)
STAGE_SECTIONS = {
    "generate": ("process",),
    "infer": ("process", "infer"),
    "synthesize": ("process", "infer", "synthesis"),
    "simulate": ("process", "infer", "synthesis", "noise", "gst"),
    "mitigate": ("process", "infer", "synthesis", "noise", "gst", "mc"),
    "report": ("process", "infer", "synthesis", "noise", "gst", "mc"),
}

DEFAULTS = {
    "process": {"p": "0.2", "n": "100000", "seed": "0", "initial_state": "0"},
    "infer": {"L": "1", "delta_override": "", "xi": "", "n_classical": "2500", "markov_l_max": "6"},
    "synthesis": {"seed": "0"},
    "noise": {"q_dep": "0", "q_dep2": "0", "gamma_ad": "0", "q_z": "0",
              "eps_meas": "0", "eps_prep": "0"},
    "gst": {"shots": "exact", "seed": "0"},
    "mc": {"runs": "100000", "chunk_size": "", "seed": "0", "steps": "1,2,3",
           "records": "false"},
}


@dataclass
class PipelineConfig:
    sections: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULTS.items()})
    output_dir: Path = Path("out")

    @classmethod
    def from_text(cls, text: str, output_dir=None) -> "PipelineConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse config: {exc}") from exc
        cfg = cls()
        for name in parser.sections():
            if name == "output":
                cfg.output_dir = Path(parser[name].get("dir", str(cfg.output_dir)))
                continue
            if name not in DEFAULTS:
                raise ValidationError(f"unknown config section [{name}]")
            for key, value in parser[name].items():
                bare = key[len(name) + 1:] if key.startswith(name + ".") else key
                if bare not in DEFAULTS[name]:
                    raise ValidationError(f"unknown key {name}.{bare}")
                cfg.sections[name][bare] = value.strip()
        if output_dir is not None:
            cfg.output_dir = Path(output_dir)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, output_dir=None) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file {path} not found")
        return cls.from_text(path.read_text(), output_dir)

    def get(self, section: str, key: str) -> str:
        return self.sections[section][key]

    def getfloat(self, section: str, key: str) -> float:
        try:
            return float(self.get(section, key))
        except ValueError as exc:
            raise ValidationError(f"{section}.{key} must be a number") from exc

    def getint(self, section: str, key: str) -> int:
        try:
            return int(self.get(section, key))
        except ValueError as exc:
            raise ValidationError(f"{section}.{key} must be an integer") from exc

    def optional_int(self, section: str, key: str):
        return self.getint(section, key) if self.get(section, key) else None

    def optional_float(self, section: str, key: str):
        return self.getfloat(section, key) if self.get(section, key) else None

    @property
    def steps(self) -> list[int]:
        try:
            steps = sorted({int(s) for s in self.get("mc", "steps").split(",") if s.strip()})
        except ValueError as exc:
            raise ValidationError("mc.steps must be a comma-separated list of integers") from exc
        if not steps or steps[0] < 1:
            raise ValidationError("mc.steps needs positive step counts")
        return steps

    @property
    def gst_shots(self):
        raw = self.get("gst", "shots").lower()
        return "exact" if raw == "exact" else self.getint("gst", "shots")

    def validate(self) -> None:
        p = self.getfloat("process", "p")
        if not 0 <= p <= 1:
            raise ValidationError("process.p must lie in [0, 1]")
        if self.getint("process", "n") < 2:
            raise ValidationError("process.n must be at least 2")
        if self.getint("infer", "L") < 0:
            raise ValidationError("infer.L must be non-negative")
        for key in DEFAULTS["noise"]:
            v = self.getfloat("noise", key)
            if not 0 <= v <= 1:
                raise ValidationError(f"noise.{key} must lie in [0, 1]")
        shots = self.gst_shots
        if shots != "exact" and shots < 1:
            raise ValidationError("gst.shots must be positive or 'exact'")
        runs = self.getint("mc", "runs")
        if runs < 1:
            raise ValidationError("mc.runs must be positive")
        chunk = self.optional_int("mc", "chunk_size")
        if chunk is not None and (chunk < 1 or runs % chunk):
            raise ValidationError("mc.chunk_size must divide mc.runs")
        self.steps

    def stage_hash(self, stage: str) -> str:
        payload = {s: self.sections[s] for s in STAGE_SECTIONS[stage]}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
