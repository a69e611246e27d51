"""Command-line front end.

A run is described by an INI-style config with one section per module::

    [run]      mode, seed, osnr
    [code]     family, e, Z, lift_seed, info_len
    [gsm]      kind, N_t, N_a, M, I_a
    [channel]  room_x ... N_r        (Geometry fields)
    [link]     G1, G2, max_frames, min_frame_errors, max_bits, log_map
    [analysis] samples, votes, osnr_lo, osnr_hi, resolution, I_a_dem
    [complexity] T1, T2              (and optional n, m, p, g_v, g_c overrides)

Command-line flags override the file.  Every CSV starts with ``#`` lines
holding the fully resolved config, and such a CSV can itself be passed
back as ``--config`` to reproduce the run.  The worker count is not part of
the config because it never changes the output.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis, channel, gsm, link, protograph

MODES = ("ber-sweep", "ami-sweep", "exit-transfer", "threshold", "table-dump", "complexity")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _optional_int(text):
    return None if str(text).strip().lower() in ("", "none") else int(text)


def _optional_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


_GEOM_TYPES = {f.name: (int if f.type in (int, "int") else float) for f in fields(channel.Geometry)}

# section -> key -> (parser, default)
SCHEMA = {
    "run": {"mode": (str, "table-dump"), "seed": (int, 0), "osnr": (str, "4:8:0.5")},
    "code": {"family": (str, "ar4ja"), "e": (int, 0), "Z": (int, 1800), "lift_seed": (int, 0),
             "info_len": (_optional_int, None)},
    "gsm": {"kind": (str, "ssergsm"), "N_t": (int, 4), "N_a": (int, 2), "M": (int, 2),
            "I_a": (float, 1.0)},
    "channel": {k: (t, getattr(channel.Geometry(), k)) for k, t in _GEOM_TYPES.items()},
    "link": {"G1": (int, 20), "G2": (int, 4), "max_frames": (int, 1000),
             "min_frame_errors": (int, 100), "max_bits": (int, 10_000_000),
             "log_map": (_bool, False)},
    "analysis": {"samples": (int, 200_000), "votes": (int, 3), "osnr_lo": (float, 0.0),
                 "osnr_hi": (float, 20.0), "resolution": (float, 0.01),
                 "I_a_dem": (_floats, (0.0, 0.25, 0.5, 0.75, 1.0))},
    "complexity": {"T1": (float, 20.0), "T2": (float, 1.0), "n": (_optional_int, None),
                   "m": (_optional_int, None), "p": (_optional_int, None),
                   "g_v": (_optional_float, None), "g_c": (_optional_float, None)},
}


class ConfigError(ValueError):
    """Raised with every violated field listed."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentSpec:
    """Fully resolved experiment: typed values for every schema key."""

    values: dict = field(default_factory=dict)
    out: str | None = None
    workers: int = 1

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def mode(self) -> str:
        return self["run.mode"]

    @property
    def osnr_grid(self) -> tuple:
        return parse_osnr(self["run.osnr"])

    def to_ini(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_render(self.values[section][key])}")
        return "\n".join(lines) + "\n"

    def geometry(self) -> channel.Geometry:
        return channel.Geometry(**self.values["channel"])

    def gsm_config(self) -> gsm.GsmConfig:
        g = self.values["gsm"]
        return gsm.GsmConfig(g["N_t"], g["N_a"], g["M"], g["I_a"])

    def base(self) -> protograph.BaseMatrix:
        return protograph.make_code(self["code.family"], self["code.e"])

    def link_config(self) -> link.LinkConfig:
        c, g, lk = self.values["code"], self.values["gsm"], self.values["link"]
        return link.LinkConfig(
            family=c["family"], e=c["e"], Z=c["Z"], lift_seed=c["lift_seed"],
            kind=g["kind"], N_t=g["N_t"], N_a=g["N_a"], M=g["M"], I_a=g["I_a"],
            geometry=self.geometry(), osnr_db=self.osnr_grid,
            G1=lk["G1"], G2=lk["G2"], max_frames=lk["max_frames"],
            min_frame_errors=lk["min_frame_errors"], max_bits=lk["max_bits"],
            seed=self["run.seed"], log_map=lk["log_map"],
        )


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_osnr(text: str) -> tuple:
    """``lo:hi:step`` (inclusive) or a plain list of values."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"OSNR grid {text!r} is not lo:hi:step")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise ValueError(f"OSNR grid {text!r} needs step > 0 and hi >= lo")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + i * step, 10) for i in range(count))
    return _floats(text)


def read_config_text(text: str) -> dict:
    """Parse INI text, or the ``#`` header of a CSV written by this tool."""
    lines = text.splitlines()
    body = [ln for ln in lines if ln.strip() and not ln.startswith(("#", ";"))]
    if lines and lines[0].startswith("#") and body and not body[0].lstrip().startswith("["):
        lines = [ln[2:] if ln.startswith("# ") else ln[1:] for ln in lines if ln.startswith("#")]
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string("\n".join(lines))
    return {s: dict(parser[s]) for s in parser.sections()}


def resolve(raw: dict, overrides: dict | None = None) -> tuple[dict, list]:
    """Typed values for every schema key, plus the list of problems found."""
    problems = []
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    merged = {s: dict(v) for s, v in raw.items()}
    for key, val in (overrides or {}).items():
        section, name = key.split(".")
        merged.setdefault(section, {})[name] = val
    for section, items in merged.items():
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, text in items.items():
            if key not in SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
                continue
            parser = SCHEMA[section][key][0]
            try:
                values[section][key] = parser(text)
            except (TypeError, ValueError) as exc:
                problems.append(f"{section}.{key}={text!r}: {exc}")
    return values, problems


def validate(spec: ExperimentSpec) -> list[str]:
    """Static consistency checks; returns the list of failures (empty = valid)."""
    errs = []
    v = spec.values
    if spec.mode not in MODES:
        errs.append(f"run.mode={spec.mode!r} not one of {MODES}")
    try:
        grid = spec.osnr_grid
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            errs.append(f"run.osnr grid {list(grid)} must be non-empty and strictly increasing")
    except ValueError as exc:
        errs.append(f"run.osnr: {exc}")
    g = v["gsm"]
    if g["kind"] not in gsm.KINDS:
        errs.append(f"gsm.kind={g['kind']!r} not one of {gsm.KINDS}")
    cfg = None
    try:
        cfg = gsm.GsmConfig(g["N_t"], g["N_a"], g["M"], g["I_a"])
    except ValueError as exc:
        errs.extend(f"gsm: {p}" for p in str(exc).split("; "))
    try:
        channel.Geometry(**v["channel"])
    except ValueError as exc:
        errs.extend(f"channel: {p}" for p in str(exc).split("; "))
    c = v["code"]
    base = None
    if c["family"] not in protograph.FAMILY_NAMES:
        errs.append(f"code.family={c['family']!r} not one of {protograph.FAMILY_NAMES}")
    elif c["e"] < 0:
        errs.append(f"code.e={c['e']} must be >= 0")
    else:
        base = protograph.make_code(c["family"], c["e"])
    if c["Z"] < 1:
        errs.append(f"code.Z={c['Z']} must be >= 1")
    elif base is not None:
        k = c["Z"] * (base.cols - base.rows)
        if c["info_len"] is not None and k != c["info_len"]:
            errs.append(f"code.Z={c['Z']} gives {k} information bits, not info_len={c['info_len']}")
        tx = c["Z"] * (base.cols - len(base.punctured))
        if cfg is not None and tx % cfg.rho:
            errs.append(f"transmitted length {tx} is not divisible by rho={cfg.rho}")
    lk = v["link"]
    if lk["G1"] < 1:
        errs.append(f"link.G1={lk['G1']} must be >= 1")
    if lk["G2"] < 0:
        errs.append(f"link.G2={lk['G2']} must be >= 0")
    if lk["max_frames"] < 1:
        errs.append(f"link.max_frames={lk['max_frames']} must be >= 1")
    a = v["analysis"]
    if a["samples"] < 10_000:
        errs.append(f"analysis.samples={a['samples']} must be >= 10000")
    if a["votes"] < 1 or a["votes"] % 2 == 0:
        errs.append(f"analysis.votes={a['votes']} must be a positive odd number")
    if not a["osnr_lo"] < a["osnr_hi"]:
        errs.append("analysis.osnr_lo must be below analysis.osnr_hi")
    if any(not 0 <= x <= 1 for x in a["I_a_dem"]):
        errs.append("analysis.I_a_dem values must lie in [0, 1]")
    for key, val in v["complexity"].items():
        if val is not None and val < 0:
            errs.append(f"complexity.{key}={val} must be >= 0")
    return errs


def build_spec(config_text: str | None = None, overrides: dict | None = None,
               out: str | None = None, workers: int = 1) -> ExperimentSpec:
    raw = read_config_text(config_text) if config_text else {}
    values, problems = resolve(raw, overrides)
    spec = ExperimentSpec(values=values, out=out, workers=workers)
    if not problems:
        problems = validate(spec)
    if problems:
        raise ConfigError(problems)
    return spec


# ---------------------------------------------------------------- modes

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit(spec: ExperimentSpec, header: list[str], rows) -> str:
    buf = io.StringIO()
    for line in spec.to_ini().splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _channel(spec):
    constellation = gsm.build_constellation(spec.gsm_config(), spec["gsm.kind"])
    return constellation, channel.build_gain_matrix(spec.geometry())


def run_ber_sweep(spec, log=None) -> str:
    stats = link.sweep_ber(spec.link_config(), workers=spec.workers, progress=log)
    return _emit(spec, list(link.CSV_COLUMNS), [s.row() for s in stats])


def run_ami_sweep(spec, log=None) -> str:
    constellation, H = _channel(spec)
    rate = spec.base().rate
    rows = []
    for i, osnr in enumerate(spec.osnr_grid):
        sigma = channel.osnr_to_sigma(H, constellation, rate, constellation.rho, osnr)
        est = analysis.estimate_ami(constellation, H, sigma, spec["analysis.samples"],
                                    rng=np.random.SeedSequence([spec["run.seed"], i]))
        rows.append([osnr, sigma, est.I_SpD, est.I_SiD, est.I_BICGSM, est.stderr, est.samples])
        if log:
            log(rows[-1])
    return _emit(spec, ["osnr_db", "sigma", "I_SpD", "I_SiD", "I_BICGSM", "stderr", "samples"], rows)


def run_exit_transfer(spec, log=None) -> str:
    constellation, H = _channel(spec)
    rate = spec.base().rate
    rows = []
    for i, osnr in enumerate(spec.osnr_grid):
        sigma = channel.osnr_to_sigma(H, constellation, rate, constellation.rho, osnr)
        for j, mi in enumerate(spec["analysis.I_a_dem"]):
            pt = analysis.demapper_transfer(constellation, H, sigma, mi, spec["analysis.samples"],
                                            rng=np.random.SeedSequence([spec["run.seed"], i, j]))
            rows.append([osnr, mi, pt.I_d, pt.I_s, pt.I_ch, pt.stderr_d, pt.stderr_s])
            if log:
                log(rows[-1])
    return _emit(spec, ["osnr_db", "I_a_dem", "I_e_d", "I_e_s", "I_ch", "stderr_d", "stderr_s"], rows)


def run_threshold(spec, log=None) -> str:
    constellation, H = _channel(spec)
    a, lk = spec.values["analysis"], spec.values["link"]
    base = spec.base()
    t = analysis.find_threshold(base, constellation, H, lk["G1"], lk["G2"],
                                osnr_lo=a["osnr_lo"], osnr_hi=a["osnr_hi"],
                                resolution=a["resolution"], votes=a["votes"],
                                seed=spec["run.seed"], samples=a["samples"])
    row = [spec["code.family"], spec["code.e"], spec["gsm.kind"], constellation.rho,
           spec["channel.d_tx"], lk["G1"], lk["G2"], round(t, 4)]
    return _emit(spec, ["family", "e", "kind", "rho", "d_tx", "G1", "G2", "threshold_db"], [row])


def run_table_dump(spec, log=None) -> str:
    # byte-for-byte the mapping table; its own header names the parameters
    constellation = gsm.build_constellation(spec.gsm_config(), spec["gsm.kind"])
    return gsm.constellation_csv(constellation)


def run_complexity(spec, log=None) -> str:
    c = spec.values["complexity"]
    base = spec.base()
    Z = spec["code.Z"]
    cfg = spec.gsm_config()
    deg = base.col_degrees.sum()
    n = c["n"] if c["n"] is not None else Z * base.cols
    m = c["m"] if c["m"] is not None else Z * base.rows
    p = c["p"] if c["p"] is not None else Z * len(base.punctured)
    g_v = c["g_v"] if c["g_v"] is not None else deg / base.cols
    g_c = c["g_c"] if c["g_c"] is not None else deg / base.rows
    est = analysis.estimate_complexity(n, m, p, g_v, g_c, c["T1"], c["T2"], cfg.rho,
                                       cfg.N_t, spec["channel.N_r"])
    row = [n, m, p, g_v, g_c, c["T1"], c["T2"], est.RA, est.RM]
    return _emit(spec, ["n", "m", "p", "g_v", "g_c", "T1", "T2", "RA", "RM"], [row])


RUNNERS = {
    "ber-sweep": run_ber_sweep,
    "ami-sweep": run_ami_sweep,
    "exit-transfer": run_exit_transfer,
    "threshold": run_threshold,
    "table-dump": run_table_dump,
    "complexity": run_complexity,
}


def run(spec: ExperimentSpec, log=None) -> str:
    """Execute ``spec`` and return the CSV text (also written to ``spec.out``)."""
    text = RUNNERS[spec.mode](spec, log)
    if spec.out:
        path = Path(spec.out)
        try:
            path.write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return text


# ---------------------------------------------------------------- entry point

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bicgsm", description=__doc__.split("\n\n")[0])
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--config", help="INI config, or a CSV previously written by this tool")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes for ber-sweep (0 = all available cores)")
    p.add_argument("--osnr", help="OSNR grid in dB, lo:hi:step")
    p.add_argument("--frames", type=int, help="frame budget per OSNR point")
    p.add_argument("--g1", type=int, help="max BP iterations per pass")
    p.add_argument("--g2", type=int, help="number of demapper feedback passes")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--validate", action="store_true", help="only check the config")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or key.count(".") != 1:
            print(f"error: --set expects SECTION.KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        overrides[key.strip()] = value.strip()
    for flag, key in (("mode", "run.mode"), ("seed", "run.seed"), ("osnr", "run.osnr"),
                      ("frames", "link.max_frames"), ("g1", "link.G1"), ("g2", "link.G2")):
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = str(val)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else None
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    workers = args.workers if args.workers > 0 else link.default_workers()
    try:
        spec = build_spec(text, overrides, args.out, workers)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except configparser.Error as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.validate:
        print("config valid")
        return 0
    log = None if args.quiet else (lambda item: print(f"  {item}", file=sys.stderr))
    try:
        out = run(spec, log)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.out:
        sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
