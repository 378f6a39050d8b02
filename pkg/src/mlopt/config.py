"""Flat key = value experiment configuration with sections.

The schema below is the single source of truth: every key has a type and
a default, unknown keys are rejected by name, and a config round-trips
losslessly through :meth:`ExperimentConfig.to_ini` /
:meth:`ExperimentConfig.from_ini`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .problems import PROBLEM_KINDS

SOLVER_NAMES = ("ml_geometric", "ml_algebraic", "gd", "pgd", "lbfgs")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_list(raw: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(tok) for tok in raw.split(","))


def _parse_str_list(raw: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(tok.strip() for tok in raw.split(","))


def _parse_opt_float(raw: str):
    raw = raw.strip().lower()
    if raw in ("", "none"):
        return None
    return float(raw)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


# section -> key -> (parser, default)
SCHEMA = {
    "problem": {
        "kind": (str, "quadratic_test"),
        "side": (int, 32),
        "levels": (int, 2),
        "undersampling": (float, 0.10),
        "lambda": (float, 0.1),
        "rho": (float, 0.01),
        "beta_domain": (float, 1e-6),
        "kl_background": (float, 0.1),
        "phantom": (str, "disks"),
        "seed": (int, 0),
        "mu": (float, 1.0),
        "gamma": (float, 1.0),
    },
    "solver": {
        "name": (str, "ml_geometric"),
        "solvers": (_parse_str_list, ("ml_geometric", "gd", "lbfgs")),
        "kappa": (float, 0.47),
        "epsilon": (float, 1e-3),
        "max_outer": (int, 200),
        "grad_tol": (_parse_opt_float, None),
        "grad_tol_rel": (float, 1e-6),
        "lbfgs_pairs": (int, 3),
        "fine_method": (str, "auto"),
        "coarse_solver": (str, "auto"),
        "line_search": (str, "wolfe"),
        "ls_rho1": (float, 1e-4),
        "ls_c2": (float, 0.9),
        "ls_beta": (float, 0.5),
        "ls_alpha0": (float, 1.0),
        "ls_max_trials": (int, 50),
        "arc_rho1": (float, 1e-4),
        "arc_beta": (float, 0.8),
        "arc_alpha0": (float, 1.0),
        "arc_max_trials": (int, 60),
        "coarse_iters": (_parse_int_list, ()),
        "fine_steps": (_parse_int_list, ()),
    },
    "output": {
        "dir": (str, "runs/out"),
        "snapshots": (_parse_int_list, ()),
        "save_images": (_parse_bool, True),
        "save_operators": (_parse_bool, False),
    },
}

_FIELD_BY_KEY = {("problem", "lambda"): "lam"}


def _field_name(section: str, key: str) -> str:
    return _FIELD_BY_KEY.get((section, key), f"{section}_{key}")


@dataclass
class ExperimentConfig:
    """Typed view of one experiment; field names mirror section_key."""

    problem_kind: str = SCHEMA["problem"]["kind"][1]
    problem_side: int = SCHEMA["problem"]["side"][1]
    problem_levels: int = SCHEMA["problem"]["levels"][1]
    problem_undersampling: float = SCHEMA["problem"]["undersampling"][1]
    lam: float = SCHEMA["problem"]["lambda"][1]
    problem_rho: float = SCHEMA["problem"]["rho"][1]
    problem_beta_domain: float = SCHEMA["problem"]["beta_domain"][1]
    problem_kl_background: float = SCHEMA["problem"]["kl_background"][1]
    problem_phantom: str = SCHEMA["problem"]["phantom"][1]
    problem_seed: int = SCHEMA["problem"]["seed"][1]
    problem_mu: float = SCHEMA["problem"]["mu"][1]
    problem_gamma: float = SCHEMA["problem"]["gamma"][1]

    solver_name: str = SCHEMA["solver"]["name"][1]
    solver_solvers: tuple = SCHEMA["solver"]["solvers"][1]
    solver_kappa: float = SCHEMA["solver"]["kappa"][1]
    solver_epsilon: float = SCHEMA["solver"]["epsilon"][1]
    solver_max_outer: int = SCHEMA["solver"]["max_outer"][1]
    solver_grad_tol: float | None = SCHEMA["solver"]["grad_tol"][1]
    solver_grad_tol_rel: float = SCHEMA["solver"]["grad_tol_rel"][1]
    solver_lbfgs_pairs: int = SCHEMA["solver"]["lbfgs_pairs"][1]
    solver_fine_method: str = SCHEMA["solver"]["fine_method"][1]
    solver_coarse_solver: str = SCHEMA["solver"]["coarse_solver"][1]
    solver_line_search: str = SCHEMA["solver"]["line_search"][1]
    solver_ls_rho1: float = SCHEMA["solver"]["ls_rho1"][1]
    solver_ls_c2: float = SCHEMA["solver"]["ls_c2"][1]
    solver_ls_beta: float = SCHEMA["solver"]["ls_beta"][1]
    solver_ls_alpha0: float = SCHEMA["solver"]["ls_alpha0"][1]
    solver_ls_max_trials: int = SCHEMA["solver"]["ls_max_trials"][1]
    solver_arc_rho1: float = SCHEMA["solver"]["arc_rho1"][1]
    solver_arc_beta: float = SCHEMA["solver"]["arc_beta"][1]
    solver_arc_alpha0: float = SCHEMA["solver"]["arc_alpha0"][1]
    solver_arc_max_trials: int = SCHEMA["solver"]["arc_max_trials"][1]
    solver_coarse_iters: tuple = SCHEMA["solver"]["coarse_iters"][1]
    solver_fine_steps: tuple = SCHEMA["solver"]["fine_steps"][1]

    output_dir: str = SCHEMA["output"]["dir"][1]
    output_snapshots: tuple = SCHEMA["output"]["snapshots"][1]
    output_save_images: bool = SCHEMA["output"]["save_images"][1]
    output_save_operators: bool = SCHEMA["output"]["save_operators"][1]

    def validate(self) -> None:
        if self.problem_kind not in PROBLEM_KINDS:
            raise ConfigError(
                f"problem.kind: unknown problem {self.problem_kind!r} "
                f"(choose from {', '.join(PROBLEM_KINDS)})")
        if self.problem_side < 4:
            raise ConfigError(f"problem.side: must be >= 4, got {self.problem_side}")
        if self.problem_levels < 1:
            raise ConfigError(
                f"problem.levels: must be >= 1, got {self.problem_levels}")
        if self.problem_side % (2 ** (self.problem_levels - 1)) != 0:
            raise ConfigError(
                f"problem.side: {self.problem_side} cannot be halved "
                f"{self.problem_levels - 1} times")
        if not 0.0 < self.problem_undersampling <= 1.0:
            raise ConfigError(
                "problem.undersampling: must lie in (0, 1], got "
                f"{self.problem_undersampling}")
        for name in self.all_solver_names():
            if name not in SOLVER_NAMES:
                raise ConfigError(
                    f"solver.name/solvers: unknown solver {name!r} "
                    f"(choose from {', '.join(SOLVER_NAMES)})")
        constrained = self.problem_kind == "kl_box"
        for name in self.all_solver_names():
            if constrained and name == "gd":
                raise ConfigError(
                    "solver: 'gd' cannot run the box-constrained problem; "
                    "use 'pgd'")
            if not constrained and name == "pgd":
                raise ConfigError(
                    "solver: 'pgd' needs the box-constrained problem; use 'gd'")
            if constrained and name == "ml_algebraic":
                raise ConfigError(
                    "solver: 'ml_algebraic' needs Hessian-vector products, "
                    "which the KL objective does not provide")
        if self.solver_line_search not in ("wolfe", "armijo"):
            raise ConfigError(
                f"solver.line_search: unknown method {self.solver_line_search!r}")
        if self.solver_fine_method not in ("auto", "gradient_descent",
                                           "projected_gd", "lbfgs"):
            raise ConfigError(
                f"solver.fine_method: unknown method {self.solver_fine_method!r}")

    def all_solver_names(self) -> tuple:
        names = [self.solver_name]
        names.extend(n for n in self.solver_solvers if n not in names)
        return tuple(names)

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        values = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {section}.{key} (valid keys: "
                        f"{', '.join(sorted(SCHEMA[section]))})")
                parse, _default = SCHEMA[section][key]
                try:
                    values[_field_name(section, key)] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for {section}.{key}: {raw!r} ({exc})") from exc
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def to_ini_text(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_fmt(getattr(self, _field_name(section, key)))}")
            lines.append("")
        return "\n".join(lines)

    def to_ini(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_ini_text())

    def override(self, seed=None, levels=None, side=None, out=None
                 ) -> "ExperimentConfig":
        """Apply CLI flag overrides; returns a validated copy."""
        updates = {}
        if seed is not None:
            updates["problem_seed"] = int(seed)
        if levels is not None:
            updates["problem_levels"] = int(levels)
        if side is not None:
            updates["problem_side"] = int(side)
        if out is not None:
            updates["output_dir"] = str(out)
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        current.update(updates)
        cfg = type(self)(**current)
        cfg.validate()
        return cfg

    def schema_document(self) -> str:
        """Human-readable listing of every key, its type, and default."""
        out = ["Configuration schema (key = default  # type)", ""]
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            for key, (parse, default) in keys.items():
                tname = getattr(parse, "__name__", str(parse)).removeprefix("_parse_")
                out.append(f"{key} = {_fmt(default)}  # {tname}")
            out.append("")
        return "\n".join(out)
