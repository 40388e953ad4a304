"""Run-configuration files: flat key-value text with four fixed sections.

Unknown sections or keys fail fast.  Every key can be overridden from the
command line; see the README for the full key table.
"""

import configparser

from .drivers import RunConfig
from .errors import ConfigError

_ALLOWED = {
    "problem": {"name", "k", "epsilon", "kappa", "manufactured", "bc", "seed"},
    "tree": {"n1", "n2", "p", "sizes", "threads"},
    "time": {"tableau", "formulation", "dt", "t_final", "repeats"},
    "output": {"dir", "run_name", "snapshots", "resample"},
}

_PARAM_KEYS = ("k", "epsilon", "kappa", "bc")


def _floats(text):
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _ints(text):
    return tuple(int(round(v)) for v in _floats(text))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config(path):
    """Parse a config file into a RunConfig, rejecting unknown keys."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    cfg.problem_params = {}
    for section in parser.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _ALLOWED[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            _apply(cfg, section, key, value)
    return cfg


def _apply(cfg, section, key, value):
    if section == "problem":
        if key == "name":
            cfg.problem = value.strip()
        elif key == "seed":
            cfg.seed = int(value)
        elif key == "manufactured":
            cfg.problem_params["manufactured"] = _bool(value)
        elif key == "bc":
            cfg.problem_params["bc"] = value.strip()
        else:
            cfg.problem_params[key] = float(value)
    elif section == "tree":
        if key == "sizes":
            cfg.sizes = _ints(value)
        elif key == "threads":
            cfg.threads = int(value)
        else:
            setattr(cfg, key, int(value))
    elif section == "time":
        if key == "tableau":
            cfg.tableau = value.strip()
        elif key == "formulation":
            cfg.formulation = value.strip()
        elif key == "dt":
            cfg.dt_list = _floats(value)
        elif key == "t_final":
            cfg.t_final = float(value)
        elif key == "repeats":
            cfg.repeats = int(value)
    elif section == "output":
        if key == "dir":
            cfg.out_dir = value.strip()
        elif key == "run_name":
            cfg.run_name = value.strip()
        elif key == "snapshots":
            cfg.snapshot_times = _floats(value)
        elif key == "resample":
            cfg.resample = int(value)


def apply_overrides(cfg, args):
    """Fold parsed command-line flags over a RunConfig."""
    simple = {"problem": "problem", "n1": "n1", "n2": "n2", "p": "p",
              "tableau": "tableau", "formulation": "formulation",
              "t_final": "t_final", "out_dir": "out_dir",
              "run_name": "run_name", "repeats": "repeats",
              "resample": "resample", "seed": "seed", "threads": "threads"}
    for flag, attr in simple.items():
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    if getattr(args, "dt", None):
        cfg.dt_list = _floats(args.dt)
    if getattr(args, "snapshots", None):
        cfg.snapshot_times = _floats(args.snapshots)
    if getattr(args, "sizes", None):
        cfg.sizes = _ints(args.sizes)
    for key in _PARAM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg.problem_params[key] = val
    if getattr(args, "manufactured", None) is not None:
        cfg.problem_params["manufactured"] = _bool(args.manufactured)
    return cfg
