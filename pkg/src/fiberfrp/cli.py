"""Experiment orchestration: config parsing, seeded pipelines, CSV emission.

Subcommands: simulate | kernels | optimize | evaluate | sweep. All
randomness derives from one master seed through labeled hashing, so
identical (config, seed) inputs reproduce byte-identical CSVs.
"""

import argparse
import configparser
import csv
import hashlib
import json
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from . import frp, kernels, metrics, nbgd, ssfm
from .signal import (
    ConfigurationError,
    DualPolSymbolSeq,
    LinkPower,
    PulseShape,
    make_constellation,
    modulate,
)

__all__ = ["ExperimentConfig", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_OPTIMIZER = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description (defaults: desk-scale single span)."""

    # fiber (standard single-mode span)
    gamma_w_km: float = 1.2
    alpha_db_km: float = 0.2
    beta2_ps2_km: float = -21.7
    length_km: float = 120.0
    # pulse
    rolloff: float = 0.01
    span: int = 64
    samples_per_symbol: int = 4
    # signal
    constellation: str = "16QAM"
    symbol_rate: float = 60e9
    n_sym: int = 16384
    # ssfm
    step_m: float = 10.0
    # ase
    ase_enabled: bool = False
    noise_figure_db: float = 5.0
    # sweeps (desk scale)
    powers_dbm: tuple = tuple(range(-2, 17, 2))
    memories: tuple = (0, 1, 3, 5)
    # optimizer
    batch_size: int = 2048
    max_iterations: int = 100_000
    alpha0: float | None = None
    schedule_decay: float = 0.9
    schedule_period: int = 15
    mse_threshold_factor: float = 0.1
    validation_factor: float = 10.0
    validation_retries: int = 5
    alpha_retry_shrink: float = 0.75
    training_polarization: str = "x"
    # misc
    seed: int = 1234
    out_dir: str = "results"

    def __post_init__(self):
        for name in ("gamma_w_km", "alpha_db_km", "length_km", "symbol_rate",
                     "step_m", "n_sym", "samples_per_symbol", "span"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if not self.powers_dbm or not len(self.memories):
            raise ConfigurationError("power and memory sweeps must be nonempty")

    def fiber(self):
        return ssfm.FiberParams.from_engineering(
            self.alpha_db_km, self.beta2_ps2_km, self.gamma_w_km, self.length_km
        )

    def pulse(self):
        return PulseShape(
            rolloff=self.rolloff,
            symbol_period=1.0 / self.symbol_rate,
            span=self.span,
            samples_per_symbol=self.samples_per_symbol,
        )

    def make_constellation(self, label=None):
        return make_constellation(label or self.constellation)

    def link_power(self, power_dbm):
        return LinkPower(power_dbm=power_dbm, symbol_rate=self.symbol_rate)

    def ase(self):
        return ssfm.AseConfig(enabled=self.ase_enabled, noise_figure_db=self.noise_figure_db)

    def optimizer(self):
        return nbgd.OptimizerConfig(
            alpha0=self.alpha0,
            schedule_decay=self.schedule_decay,
            schedule_period=self.schedule_period,
            mse_threshold_factor=self.mse_threshold_factor,
            max_iterations=self.max_iterations,
            validation_factor=self.validation_factor,
            validation_retries=self.validation_retries,
            alpha_retry_shrink=self.alpha_retry_shrink,
            batch_size=self.batch_size,
        )

    def hash(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.md5(blob).hexdigest()[:12]


_SECTION_FIELDS = {
    "fiber": ("gamma_w_km", "alpha_db_km", "beta2_ps2_km", "length_km"),
    "pulse": ("rolloff", "span", "samples_per_symbol"),
    "signal": ("constellation", "symbol_rate", "n_sym"),
    "ssfm": ("step_m",),
    "ase": ("ase_enabled", "noise_figure_db"),
    "sweep": ("powers_dbm", "memories"),
    "optimizer": (
        "batch_size", "max_iterations", "alpha0", "schedule_decay",
        "schedule_period", "mse_threshold_factor", "validation_factor",
        "validation_retries", "alpha_retry_shrink", "training_polarization",
    ),
    "run": ("seed", "out_dir"),
}


def load_config(path):
    """Parse the sectioned key-value config file into an ExperimentConfig."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    values = {}
    defaults = ExperimentConfig()
    for section, names in _SECTION_FIELDS.items():
        if not parser.has_section(section):
            continue
        for name in names:
            if not parser.has_option(section, name):
                continue
            raw = parser.get(section, name)
            default = getattr(defaults, name)
            if name in ("powers_dbm", "memories"):
                cast = float if name == "powers_dbm" else int
                values[name] = tuple(cast(tok) for tok in raw.replace(",", " ").split())
            elif name == "alpha0":
                values[name] = None if raw.lower() in ("none", "auto") else float(raw)
            elif isinstance(default, bool):
                values[name] = parser.getboolean(section, name)
            elif isinstance(default, int):
                values[name] = int(raw)
            elif isinstance(default, float):
                values[name] = float(raw)
            else:
                values[name] = raw
    unknown = set(parser.sections()) - set(_SECTION_FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return ExperimentConfig(**values)


def derive_rng(master_seed, label):
    """Deterministic per-subsystem generator from the master seed."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), zlib.crc32(label.encode())])
    )


def random_symbols(config, label="symbols", constellation=None):
    """Uniform i.i.d. dual-polarization symbol stream."""
    points = (constellation or config.make_constellation()).points
    rng = derive_rng(config.seed, label)
    x = points[rng.integers(points.size, size=config.n_sym)]
    y = points[rng.integers(points.size, size=config.n_sym)]
    return DualPolSymbolSeq(x=x, y=y)


def run_chain(config, power_dbm, constellation=None, symbols=None):
    """Full transmit/propagate/receive chain; returns (sent, received)."""
    a = symbols if symbols is not None else random_symbols(
        config, constellation=constellation
    )
    pulse = config.pulse()
    fiber = config.fiber()
    power = config.link_power(power_dbm)
    field_tx = modulate(a, pulse, power)
    ssfm.check_sample_rate(field_tx, config.symbol_rate * (1.0 + config.rolloff))
    field_rx = ssfm.propagate(field_tx, fiber, config.step_m)
    ase = config.ase()
    if ase.enabled:
        rng = derive_rng(config.seed, f"ase-{power_dbm}")
        field_rx = ssfm.add_ase(field_rx, ase, fiber, rng)
    field_rx = ssfm.cdc(field_rx, fiber)
    r = ssfm.receive(field_rx, pulse, power)
    return a, r


# ---------------------------------------------------------------------------
# CSV plumbing

def _open_csv(path, config):
    f = open(path, "w", newline="")
    f.write(f"# config_hash={config.hash()} seed={config.seed}\n")
    return f


def write_sim_csv(path, config, power_dbm, a, r):
    with _open_csv(path, config) as f:
        writer = csv.writer(f)
        writer.writerow(
            ["power_dbm", "seed", "index",
             "a_x_re", "a_x_im", "a_y_re", "a_y_im",
             "r_x_re", "r_x_im", "r_y_re", "r_y_im"]
        )
        for n in range(len(a)):
            writer.writerow(
                [repr(float(power_dbm)), config.seed, n]
                + [repr(float(v)) for v in (
                    a.x[n].real, a.x[n].imag, a.y[n].real, a.y[n].imag,
                    r.x[n].real, r.x[n].imag, r.y[n].real, r.y[n].imag,
                )]
            )


def read_sim_csv(path):
    """Returns (power_dbm, sent DualPolSymbolSeq, received DualPolSymbolSeq)."""
    with open(path) as f:
        rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
    header, data = rows[0], rows[1:]
    if header[0] != "power_dbm":
        raise ValueError(f"{path}: unrecognized simulation CSV header")
    arr = np.array([[float(v) for v in row[3:]] for row in data])
    power = float(data[0][0])
    a = DualPolSymbolSeq(x=arr[:, 0] + 1j * arr[:, 1], y=arr[:, 2] + 1j * arr[:, 3])
    r = DualPolSymbolSeq(x=arr[:, 4] + 1j * arr[:, 5], y=arr[:, 6] + 1j * arr[:, 7])
    return power, a, r


EVAL_COLUMNS = [
    "power_dbm", "memory", "source", "snr_db", "delta_r", "delta_phi",
    "mean_phase_rad", "rel_error", "kernel_count", "mults_per_symbol",
]


def evaluate_model(config, a, r_ssfm, tensor, power_dbm, constellation=None):
    """One evaluation row: model metrics against the SSFM reference."""
    const = constellation or config.make_constellation()
    power = config.link_power(power_dbm)
    r_model = frp.predict_sequence(a, tensor, config.fiber().gamma, power.symbol_energy)
    stats = metrics.conditional_stats(a, r_model, const)
    rings = metrics.RingStructure.from_constellation(const)
    L = len(tensor)
    return {
        "power_dbm": power_dbm,
        "memory": tensor.memory,
        "source": tensor.provenance,
        "snr_db": metrics.snr(stats),
        "delta_r": metrics.delta_r(stats),
        "delta_phi": metrics.delta_phi(stats, rings),
        "mean_phase_rad": metrics.mean_phase_rotation(stats),
        "rel_error": metrics.relative_error(r_ssfm, r_model),
        "kernel_count": L,
        "mults_per_symbol": L,
    }


def ssfm_row(config, a, r_ssfm, power_dbm, constellation=None):
    const = constellation or config.make_constellation()
    stats = metrics.conditional_stats(a, r_ssfm, const)
    rings = metrics.RingStructure.from_constellation(const)
    return {
        "power_dbm": power_dbm,
        "memory": -1,
        "source": "ssfm",
        "snr_db": metrics.snr(stats),
        "delta_r": metrics.delta_r(stats),
        "delta_phi": metrics.delta_phi(stats, rings),
        "mean_phase_rad": metrics.mean_phase_rotation(stats),
        "rel_error": 0.0,
        "kernel_count": 0,
        "mults_per_symbol": 0,
    }


def write_eval_csv(path, config, rows):
    with _open_csv(path, config) as f:
        writer = csv.writer(f)
        writer.writerow(EVAL_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in EVAL_COLUMNS])


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# ---------------------------------------------------------------------------
# optimizer data plumbing

def make_data_source(config, power_dbm, memory, a, r):
    """Batch factory over a simulated stream: distinct rows per batch index."""
    n = len(a)
    pol = config.training_polarization

    def source(batch_index):
        rng = derive_rng(config.seed, f"optimizer-batch-{batch_index}-{power_dbm}-{memory}")
        positions = rng.choice(n, size=min(config.batch_size, n), replace=False)
        return frp.build_batch(a, r, memory, positions, pol=pol)

    return source


def optimize_kernels(config, power_dbm, memory, a=None, r=None):
    """NBGD optimization at one (power, memory) cell; returns (tensor, report)."""
    if a is None or r is None:
        a, r = run_chain(config, power_dbm)
    source = make_data_source(config, power_dbm, memory, a, r)
    power = config.link_power(power_dbm)
    tensor, report = nbgd.run(
        source,
        config.optimizer(),
        config.fiber().gamma,
        power.symbol_energy,
        memory,
        seed=config.seed,
    )
    tensor = replace(tensor, training_power_dbm=float(power_dbm))
    report["training_power_dbm"] = float(power_dbm)
    report["config"] = asdict(config)
    return tensor, report


# ---------------------------------------------------------------------------
# subcommands

def _outdir(config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def sim_path(config, power_dbm):
    return _outdir(config) / f"sim_P{power_dbm:g}_s{config.seed}.csv"


def ensure_simulation(config, power_dbm, constellation_label=None):
    """Load the per-power simulation CSV, generating it if absent."""
    label = constellation_label or config.constellation
    cfg = replace(config, constellation=label)
    suffix = "" if label == config.constellation else f"_{label}"
    path = _outdir(config) / f"sim_P{power_dbm:g}_s{config.seed}{suffix}.csv"
    if path.exists():
        _, a, r = read_sim_csv(path)
        return a, r, path
    a, r = run_chain(cfg, power_dbm)
    write_sim_csv(path, cfg, power_dbm, a, r)
    return a, r, path


def cmd_simulate(config, args):
    for power in args.power or config.powers_dbm:
        a, r, path = ensure_simulation(config, power)
        print(f"simulate P={power:g} dBm -> {path}")
    return EXIT_OK


def kernel_path(config, memory):
    return _outdir(config) / f"kernels_analytical_M{memory}.bin"


def cmd_kernels(config, args):
    pulse, fiber = config.pulse(), config.fiber()
    for memory in args.memory or config.memories:
        memory = int(memory)
        grid = kernels.default_grid(pulse, fiber, memory)
        tensor = kernels.compute_tensor(memory, pulse, fiber, grid)
        path = kernel_path(config, memory)
        kernels.save_tensor(tensor, path, grid)
        kernels.export_csv(tensor, path.with_suffix(".csv"))
        # convergence certificate: center kernel on a doubled grid
        refined = kernels.compute_kernel(0, 0, 0, pulse, fiber, grid.refined())
        rel = abs(refined - tensor.get(0, 0, 0)) / abs(refined)
        cert = {"kernel_000_refinement_rel_change": rel, "n_t": grid.n_t, "n_z": grid.n_z}
        path.with_suffix(".cert.json").write_text(json.dumps(cert, indent=2))
        print(f"kernels M={memory} -> {path} (refinement change {rel:.2e})")
    return EXIT_OK


def nbgd_path(config, power_dbm, memory):
    return _outdir(config) / f"kernels_nbgd_P{power_dbm:g}_M{memory}.bin"


def cmd_optimize(config, args):
    code = EXIT_OK
    for power in args.power or config.powers_dbm:
        for memory in args.memory or config.memories:
            memory = int(memory)
            a, r, _ = ensure_simulation(config, power)
            tensor, report = optimize_kernels(config, power, memory, a, r)
            path = nbgd_path(config, power, memory)
            report_path = path.with_suffix(".report.json")
            report_path.write_text(json.dumps(_json_safe(report), indent=2))
            if report["status"] != "validated":
                print(f"optimize P={power:g} M={memory}: FAILED (see {report_path})")
                code = EXIT_OPTIMIZER
                continue
            kernels.save_tensor(tensor, path)
            print(
                f"optimize P={power:g} M={memory} -> {path} "
                f"({report['iterations']} iterations, MSE {report['converged_mse']:.3e})"
            )
    return code


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def cmd_evaluate(config, args):
    power = args.power[0] if args.power else config.powers_dbm[0]
    const_label = args.constellation or config.constellation
    constellation = config.make_constellation(const_label)
    a, r, _ = ensure_simulation(config, power, const_label)
    rows = [ssfm_row(config, a, r, power, constellation)]
    for file in args.kernel_files:
        tensor, _ = kernels.load_tensor(file)
        if args.memory and tensor.memory not in [int(m) for m in args.memory]:
            raise ConfigurationError(
                f"{file}: tensor memory {tensor.memory} not in requested {args.memory}"
            )
        rows.append(evaluate_model(config, a, r, tensor, power, constellation))
    suffix = "" if const_label == config.constellation else f"_{const_label}"
    path = _outdir(config) / f"eval_P{power:g}{suffix}.csv"
    write_eval_csv(path, config, rows)
    print(f"evaluate P={power:g} -> {path}")
    return EXIT_OK


def _sweep_cell(config, power, memory):
    """One (power, memory) sweep cell; resumable by output-file presence."""
    out = _outdir(config)
    eval_path = out / f"eval_P{power:g}_M{memory}.csv"
    if eval_path.exists():
        return f"skip P={power:g} M={memory}"
    a, r, _ = ensure_simulation(config, power)
    rows = [ssfm_row(config, a, r, power)]

    kpath = kernel_path(config, memory)
    if not kpath.exists():
        pulse, fiber = config.pulse(), config.fiber()
        grid = kernels.default_grid(pulse, fiber, memory)
        kernels.save_tensor(kernels.compute_tensor(memory, pulse, fiber, grid), kpath, grid)
    analytical, _ = kernels.load_tensor(kpath)
    rows.append(evaluate_model(config, a, r, analytical, power))

    npath = nbgd_path(config, power, memory)
    if not npath.exists():
        tensor, report = optimize_kernels(config, power, memory, a, r)
        npath.with_suffix(".report.json").write_text(
            json.dumps(_json_safe(report), indent=2)
        )
        if report["status"] != "validated":
            raise RuntimeError(f"optimizer failed at P={power:g} M={memory}")
        kernels.save_tensor(tensor, npath)
    optimized, _ = kernels.load_tensor(npath)
    rows.append(evaluate_model(config, a, r, optimized, power))

    write_eval_csv(eval_path, config, rows)
    return f"done P={power:g} M={memory}"


def cmd_sweep(config, args):
    cells = [(p, int(m)) for p in config.powers_dbm for m in config.memories]
    failures = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_sweep_cell, config, p, m): (p, m) for p, m in cells}
            for future, cell in futures.items():
                try:
                    print(future.result())
                except Exception as exc:  # record, keep sweeping
                    failures.append((cell, str(exc)))
    else:
        for p, m in cells:
            try:
                print(_sweep_cell(config, p, m))
            except Exception as exc:
                failures.append(((p, m), str(exc)))

    # combined CSV for plotting (regenerated every run)
    combined = []
    for p, m in cells:
        path = _outdir(config) / f"eval_P{p:g}_M{m}.csv"
        if not path.exists():
            continue
        with open(path) as f:
            rows = [row for row in csv.reader(f) if row and not row[0].startswith("#")]
        combined.extend(rows[1:])
    seen = set()
    with _open_csv(_outdir(config) / "evaluate_all.csv", config) as f:
        writer = csv.writer(f)
        writer.writerow(EVAL_COLUMNS)
        for row in combined:
            key = tuple(row[:3])
            if key in seen:
                continue
            seen.add(key)
            writer.writerow(row)

    for cell, msg in failures:
        print(f"cell {cell} failed: {msg}", file=sys.stderr)
    return EXIT_NUMERICAL if failures else EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="fiberfrp")
    parser.add_argument("--config", type=str, default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the SSFM chain and dump symbol CSVs")
    p_ker = sub.add_parser("kernels", help="compute analytical kernel tensors")
    p_opt = sub.add_parser("optimize", help="NBGD-optimize kernels from simulation data")
    p_eval = sub.add_parser("evaluate", help="score kernel tensors against SSFM data")
    p_sweep = sub.add_parser("sweep", help="full power x memory grid")

    for p in (p_sim, p_opt, p_eval):
        p.add_argument("--power", type=float, action="append", help="launch power dBm")
    for p in (p_ker, p_opt, p_eval):
        p.add_argument("--memory", type=int, action="append", help="model memory M")
    p_eval.add_argument("--constellation", type=str, default=None)
    p_eval.add_argument("kernel_files", nargs="+", help="kernel tensor files")
    p_sweep.add_argument("--jobs", type=int, default=1)
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "kernels": cmd_kernels,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        if args.out is not None:
            config = replace(config, out_dir=args.out)
    except (ConfigurationError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](config, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
