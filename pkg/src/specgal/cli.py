"""Batch front end: config parsing, the run loop, checkpoints, energy CSV.

Configs are plain ``key = value`` text files with ``#`` comments.  A run
writes ``energies.csv`` (header ``t,E_v,E_b``, full double precision) to
the output directory, optional periodic checkpoints, a final checkpoint,
and energy figures rendered from the CSV.

Exit codes: 0 ok, 1 usage/config error, 2 numerical failure, 3 I/O error.
"""

import argparse
import math
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mhd import (
    NumericalError,
    Params,
    SpectralState,
    energies,
    random_state,
    roll_state,
    step_euler_explicit,
    step_imex_euler,
    step_rk4,
)

__all__ = [
    "RunConfig",
    "parse_config",
    "run",
    "checkpoint_write",
    "checkpoint_read",
    "read_checkpoint_header",
    "main",
]

_MAGIC = b"SCGK"
_VERSION = 1
# Header parameter order (10 little-endian float64 after the dims):
# P, R, tau, Pm, eta, e_r1, e_r2, e_r3, L1, L2.
_STATE_ORDER = (
    "theta",
    "v_tor",
    "v_pol",
    "v_mean1",
    "v_mean2",
    "b_tor",
    "b_pol",
    "b_mean1",
    "b_mean2",
)

_SCHEMES = ("euler", "rk4", "imex")
_INITIAL_CONDITIONS = ("random", "roll", "checkpoint")


class ConfigError(ValueError):
    """Invalid or missing configuration."""


@dataclass
class RunConfig:
    n1: int = 8
    n2: int = 8
    n3: int = 8
    prandtl: float = 1.0
    rayleigh: float = 0.0
    tau: float = 0.0
    pm: float = 1.0
    eta: float = None
    e_r: tuple = (0.0, 0.0, 1.0)
    l1: float = 2.0 * math.pi
    l2: float = 2.0 * math.pi
    dt: float = 1e-4
    steps: int = 0
    scheme: str = "rk4"
    output_interval: int = 1
    checkpoint_interval: int = 0
    output_dir: str = "."
    initial_condition: str = "random"
    seed: int = 0
    amp_theta: float = 0.1
    amp_v: float = 1.0
    amp_b: float = 1e-3
    checkpoint_path: str = ""
    linear_only: bool = False
    figures: bool = True

    def __post_init__(self):
        if min(self.n1, self.n2, self.n3) <= 0:
            raise ConfigError("truncations N1, N2, N3 must be positive")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        if self.initial_condition not in _INITIAL_CONDITIONS:
            raise ConfigError(
                f"initial_condition must be one of {_INITIAL_CONDITIONS}, "
                f"got {self.initial_condition!r}"
            )
        if self.output_interval <= 0:
            raise ConfigError("output_interval must be positive")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval must be non-negative")

    @property
    def params(self):
        return Params(
            prandtl=self.prandtl,
            rayleigh=self.rayleigh,
            tau=self.tau,
            pm=self.pm,
            eta=self.eta,
            e_r=self.e_r,
            l1=self.l1,
            l2=self.l2,
        )


_KEY_TYPES = {
    "N1": ("n1", int),
    "N2": ("n2", int),
    "N3": ("n3", int),
    "P": ("prandtl", float),
    "R": ("rayleigh", float),
    "tau": ("tau", float),
    "Pm": ("pm", float),
    "eta": ("eta", float),
    "L1": ("l1", float),
    "L2": ("l2", float),
    "dt": ("dt", float),
    "steps": ("steps", int),
    "scheme": ("scheme", str),
    "output_interval": ("output_interval", int),
    "checkpoint_interval": ("checkpoint_interval", int),
    "output_dir": ("output_dir", str),
    "initial_condition": ("initial_condition", str),
    "seed": ("seed", int),
    "amp_theta": ("amp_theta", float),
    "amp_v": ("amp_v", float),
    "amp_b": ("amp_b", float),
    "checkpoint_path": ("checkpoint_path", str),
}


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config(path):
    """Parse a key = value config file into a RunConfig."""
    kwargs = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "e_r":
            parts = [p for p in value.replace(",", " ").split() if p]
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: e_r needs three components")
            kwargs["e_r"] = tuple(float(p) for p in parts)
        elif key == "linear_only":
            kwargs["linear_only"] = _parse_bool(value)
        elif key == "figures":
            kwargs["figures"] = _parse_bool(value)
        elif key in _KEY_TYPES:
            name, conv = _KEY_TYPES[key]
            try:
                kwargs[name] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return RunConfig(**kwargs)


# -- checkpoints ---------------------------------------------------------------


def checkpoint_write(state, params, path):
    """Write a bit-exact checkpoint (magic, version, dims, params, time,
    then each component's complex coefficients as interleaved little-endian
    float64 pairs in (component, n1, n2, n3) lexicographic order with n1,
    n2 ascending from -N1, -N2)."""
    n1, n2, n3 = state.dims
    header = _MAGIC + struct.pack("<IIII", _VERSION, n1, n2, n3)
    header += struct.pack(
        "<10d",
        params.prandtl,
        params.rayleigh,
        params.tau,
        params.pm,
        params.eta,
        *params.e_r,
        params.l1,
        params.l2,
    )
    header += struct.pack("<d", state.t)
    blobs = [header]
    for name in _STATE_ORDER:
        arr = np.ascontiguousarray(getattr(state, name), dtype=np.complex128)
        blobs.append(arr.astype("<c16").tobytes())
    Path(path).write_bytes(b"".join(blobs))


def read_checkpoint_header(path):
    """Return (dims, Params, t, payload_offset) from a checkpoint file."""
    blob = Path(path).read_bytes()
    fixed = 4 + 16 + 80 + 8
    if len(blob) < fixed or blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, n1, n2, n3 = struct.unpack_from("<IIII", blob, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    vals = struct.unpack_from("<10d", blob, 20)
    t = struct.unpack_from("<d", blob, 100)[0]
    params = Params(
        prandtl=vals[0],
        rayleigh=vals[1],
        tau=vals[2],
        pm=vals[3],
        eta=vals[4],
        e_r=vals[5:8],
        l1=vals[8],
        l2=vals[9],
    )
    return (n1, n2, n3), params, t, fixed


def checkpoint_read(path, dims=None):
    """Read a checkpoint back into a SpectralState (bit-exact round trip).

    If ``dims`` is given, a mismatch against the file header is an error
    naming expected and found truncations.
    """
    (n1, n2, n3), _, t, offset = read_checkpoint_header(path)
    if dims is not None and tuple(dims) != (n1, n2, n3):
        raise ValueError(
            f"{path}: dimension mismatch: expected N1,N2,N3={tuple(dims)}, "
            f"found ({n1}, {n2}, {n3})"
        )
    blob = Path(path).read_bytes()
    state = SpectralState.zeros(n1, n2, n3, t=t)
    shape3 = (2 * n1 + 1, 2 * n2 + 1, n3 + 2)
    for name in _STATE_ORDER:
        shape = shape3 if getattr(state, name).ndim == 3 else (n3 + 2,)
        count = int(np.prod(shape))
        nbytes = 16 * count
        if offset + nbytes > len(blob):
            raise ValueError(f"{path}: truncated checkpoint (while reading {name})")
        arr = np.frombuffer(blob, dtype="<c16", count=count, offset=offset)
        setattr(state, name, arr.reshape(shape).astype(np.complex128))
        offset += nbytes
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after state payload")
    return state


def checkpoint_params(path):
    """Params stored in a checkpoint header."""
    _, params, _, _ = read_checkpoint_header(path)
    return params


# -- run loop ------------------------------------------------------------------

_STEPPERS = {
    "euler": step_euler_explicit,
    "rk4": step_rk4,
    "imex": step_imex_euler,
}


def _initial_state(config, resume=None):
    if resume:
        return checkpoint_read(resume, dims=(config.n1, config.n2, config.n3))
    if config.initial_condition == "checkpoint":
        if not config.checkpoint_path:
            raise ConfigError("initial_condition = checkpoint needs checkpoint_path")
        return checkpoint_read(config.checkpoint_path, dims=(config.n1, config.n2, config.n3))
    if config.initial_condition == "roll":
        return roll_state(
            config.n1, config.n2, config.n3, config.params,
            amp_theta=config.amp_theta, amp_v=config.amp_v, amp_b=config.amp_b,
        )
    return random_state(
        config.n1, config.n2, config.n3, config.params,
        seed=config.seed,
        amp_theta=config.amp_theta, amp_v=config.amp_v, amp_b=config.amp_b,
    )


def _format_sample(sample):
    return f"{sample.t:.17g},{sample.e_v:.17g},{sample.e_b:.17g}\n"


def run(config, resume=None):
    """Execute a configured run; returns the process exit status."""
    params = config.params
    stepper = _STEPPERS[config.scheme]
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        state = _initial_state(config, resume=resume)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3

    csv_path = out_dir / "energies.csv"
    try:
        with open(csv_path, "w") as csv:
            csv.write("t,E_v,E_b\n")
            sample = energies(state, params)
            if not (np.isfinite(sample.e_v) and np.isfinite(sample.e_b)):
                print("numerical failure in the initial state", file=sys.stderr)
                return 2
            csv.write(_format_sample(sample))
            for step in range(1, config.steps + 1):
                try:
                    state = stepper(state, params, config.dt, linear_only=config.linear_only)
                except NumericalError as exc:
                    print(f"numerical failure at step {step}: {exc}", file=sys.stderr)
                    return 2
                if step % config.output_interval == 0:
                    sample = energies(state, params)
                    if not (np.isfinite(sample.e_v) and np.isfinite(sample.e_b)):
                        print(f"numerical failure at step {step}: non-finite energy",
                              file=sys.stderr)
                        return 2
                    csv.write(_format_sample(sample))
                if config.checkpoint_interval and step % config.checkpoint_interval == 0:
                    checkpoint_write(state, params, out_dir / f"checkpoint_{step:08d}.ckpt")
        checkpoint_write(state, params, out_dir / "checkpoint_final.ckpt")
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    if config.figures:
        from .plotting import render_energy_figures

        try:
            render_energy_figures(csv_path, out_dir)
        except OSError as exc:
            print(f"i/o error while rendering figures: {exc}", file=sys.stderr)
            return 3
    return 0


def _cmd_inspect(path):
    try:
        dims, params, t, _ = read_checkpoint_header(path)
        state = checkpoint_read(path)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    sample = energies(state, params)
    print(f"checkpoint: {path}")
    print(f"  dims: N1={dims[0]} N2={dims[1]} N3={dims[2]}")
    print(
        "  params: P={p.prandtl:g} R={p.rayleigh:g} tau={p.tau:g} Pm={p.pm:g} "
        "eta={p.eta:g} e_r=({e[0]:g},{e[1]:g},{e[2]:g}) L1={p.l1:g} L2={p.l2:g}".format(
            p=params, e=params.e_r
        )
    )
    print(f"  t = {t:.17g}")
    print(f"  E_v = {sample.e_v:.17g}")
    print(f"  E_b = {sample.e_b:.17g}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="specgal",
        description="Spectral-Galerkin magnetoconvection runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a configured time integration")
    p_run.add_argument("--config", required=True, help="path to a key = value config file")
    p_run.add_argument("--output-dir", default=None, help="override the configured output dir")
    p_run.add_argument("--resume", default=None, help="resume from a checkpoint file")
    p_run.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_ins = sub.add_parser("inspect", help="print checkpoint header and energies")
    p_ins.add_argument("--checkpoint", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    if args.command == "inspect":
        return _cmd_inspect(args.checkpoint)

    try:
        config = parse_config(args.config)
        if args.output_dir is not None:
            config.output_dir = args.output_dir
        if args.no_figures:
            config.figures = False
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return run(config, resume=args.resume)


if __name__ == "__main__":
    sys.exit(main())
