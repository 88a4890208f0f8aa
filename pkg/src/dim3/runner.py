"""Run configuration, multi-chain execution, checkpoints and reports.

Config files are INI documents with sections ``[model]``, ``[data]``,
``[run]`` and ``[hyper]``; ``RunConfig.SECTIONS`` lists the keys.

Checkpoint layout (all integers little-endian)::

    8 bytes   magic b"DIM3CKPT"
    uint16    format version
    1 byte    endianness of the array payload (b"<")
    uint32    header length H
    H bytes   UTF-8 JSON header: scalars, rng state, array table
    ...       raw array bytes at the offsets listed in the header
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .analysis import (
    TRACE_COLUMNS,
    ChainTrace,
    MembershipAccumulator,
    geweke_z,
    iat,
    l2_compat,
    l2_membership,
    loglik_summary,
    psrf,
    state_density_D,
)
from .generator import (
    DatasetBundle,
    DatasetFormatError,
    fixed_truth,
    generate_fixed,
    generate_mti,
    generate_mtv,
    load_dataset,
    sampson_like,
    save_dataset,
)
from .gibbs import HYPER_NAMES, SamplerState, finite_state, init_state, sweep
from .hyper import HyperPriors
from .model import GlobalWeights, LabelState
from .slice import slice_sweep_mtv

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "DataError",
    "RunConfig",
    "Checkpoint",
    "MODEL_CHOICES",
    "load_config",
    "load_data",
    "run",
    "resume",
    "gen",
    "evaluate",
    "max_workers",
]

MODEL_CHOICES = ("mtv-gibbs", "mtv-slice", "mti-gibbs", "f-mtv", "f-mti")
CKPT_MAGIC = b"DIM3CKPT"
CKPT_VERSION = 1
WORKER_ENV = "DIM3_MAX_WORKERS"


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


class Halted(RuntimeError):
    """Raised by ``halt_at`` to imitate a killed process (testing aid)."""


@dataclass
class RunConfig:
    model: str = "mtv-gibbs"
    K_init: int = 3
    K_fixed: int = 3
    random_order: bool = False
    dataset: str | None = None
    case: int | None = None
    generator: str = "fixed"
    n: int = 20
    T: int = 3
    data_seed: int = 0
    iterations: int = 1000
    burn_in: float = 0.5
    thin: int = 1
    chains: int = 1
    seed: int = 0
    output: str = "dim3-out"
    checkpoint_every: int = 0
    workers: int = 0  # 0: one worker per chain
    gamma: float = 1.0
    alpha: float = 1.0
    kappa: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    freeze: tuple = ()
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    conc_shape: float = 1.0
    conc_rate: float = 1.0
    ratio_a: float = 1.0
    ratio_b: float = 1.0
    halt_at: int | None = None

    SECTIONS = {
        "model": ("model", "K_init", "K_fixed", "random_order"),
        "data": ("dataset", "case", "generator", "n", "T", "data_seed"),
        "run": ("iterations", "burn_in", "thin", "chains", "seed", "output",
                "checkpoint_every", "workers"),
        "hyper": ("gamma", "alpha", "kappa", "lambda1", "lambda2", "freeze", "gamma_shape",
                  "gamma_rate", "conc_shape", "conc_rate", "ratio_a", "ratio_b"),
    }
    # excluded from the digest: they do not change the sampled values
    NON_SEMANTIC = ("output", "checkpoint_every", "workers", "halt_at")

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"invalid config field '{name}': {why}")

        if self.model not in MODEL_CHOICES:
            bad("model", f"must be one of {', '.join(MODEL_CHOICES)}")
        if self.iterations < 1:
            bad("iterations", "must be > 0")
        if self.chains < 1:
            bad("chains", "must be >= 1")
        if not 0 <= self.burn_in < 1:
            bad("burn_in", "must lie in [0, 1)")
        if self.thin < 1:
            bad("thin", "must be >= 1")
        if self.K_init < 1:
            bad("K_init", "must be >= 1")
        if self.K_fixed < 1:
            bad("K_fixed", "must be >= 1")
        if self.workers < 0:
            bad("workers", "must be >= 0")
        if self.checkpoint_every < 0:
            bad("checkpoint_every", "must be >= 0")
        if self.generator not in ("fixed", "mtv", "mti", "sampson"):
            bad("generator", "must be one of fixed, mtv, mti, sampson")
        if self.case is not None and self.case not in (1, 2, 3, 4):
            bad("case", "must be 1..4")
        if self.n < 2 or self.T < 1:
            bad("n" if self.n < 2 else "T", "must be n >= 2 and T >= 1")
        for name in ("gamma", "lambda1", "lambda2", "gamma_shape", "gamma_rate",
                     "conc_shape", "conc_rate", "ratio_a", "ratio_b"):
            if not getattr(self, name) > 0:
                bad(name, "must be positive")
        if self.alpha <= 0 or self.kappa < 0:
            bad("alpha" if self.alpha <= 0 else "kappa", "need alpha > 0 and kappa >= 0")
        if isinstance(self.freeze, str):
            self.freeze = tuple(x.strip() for x in self.freeze.replace(",", " ").split() if x.strip())
        self.freeze = tuple(sorted(set(self.freeze)))
        unknown = set(self.freeze) - set(HYPER_NAMES)
        if unknown:
            bad("freeze", f"unknown name(s) {sorted(unknown)}; choose from {HYPER_NAMES}")
        if self.halt_at is not None and self.halt_at < 1:
            bad("halt_at", "must be >= 1")

    @property
    def prior(self) -> HyperPriors:
        return HyperPriors(self.gamma_shape, self.gamma_rate, self.conc_shape,
                           self.conc_rate, self.ratio_a, self.ratio_b)

    @property
    def finite(self) -> bool:
        return self.model.startswith("f-")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["freeze"] = list(self.freeze)
        return d

    def digest(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self.NON_SEMANTIC}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig(**d)


def _convert(name: str, raw: str):
    typ = {f.name: f.type for f in fields(RunConfig)}[name]
    raw = raw.strip()
    try:
        if name == "freeze":
            return tuple(x for x in raw.replace(",", " ").split() if x)
        if typ in ("int", "int | None"):
            return None if raw.lower() in ("", "none") and "None" in typ else int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if typ == "str | None":
            return raw or None
        return raw
    except ValueError:
        raise ConfigError(f"invalid config field '{name}': cannot parse {raw!r} as {typ}") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read an INI config (optional) and apply overrides; overrides win."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        for section in parser.sections():
            if section not in RunConfig.SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            allowed = RunConfig.SECTIONS[section]
            for key, raw in parser.items(section):
                if key not in allowed:
                    raise ConfigError(f"unknown config field '{key}' in [{section}]")
                values[key] = _convert(key, raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        return RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def max_workers(requested: int) -> int:
    cap = os.environ.get(WORKER_ENV)
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise ConfigError(f"{WORKER_ENV} must be an integer, got {cap!r}") from None
    return requested


def load_data(cfg: RunConfig) -> DatasetBundle:
    """Dataset file when given, otherwise the configured generator."""
    if cfg.dataset:
        try:
            return load_dataset(cfg.dataset)
        except DatasetFormatError as err:
            raise DataError(str(err)) from None
    if cfg.generator == "sampson":
        return sampson_like(cfg.data_seed)
    if cfg.generator in ("mtv", "mti"):
        w = GlobalWeights(np.zeros(0), 1.0, cfg.gamma, cfg.alpha, cfg.kappa,
                          cfg.lambda1, cfg.lambda2)
        fn = generate_mtv if cfg.generator == "mtv" else generate_mti
        return fn(cfg.n, cfg.T, w, cfg.data_seed)
    if cfg.case is None:
        raise ConfigError("invalid config field 'dataset': give a dataset path or a case 1..4")
    return generate_fixed(fixed_truth(cfg.case, cfg.n), cfg.n, cfg.T, cfg.data_seed)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    iteration: int
    chain: int
    digest: str
    model: str
    finite: bool
    scalars: dict
    rng_state: dict
    arrays: dict = field(default_factory=dict)
    version: int = CKPT_VERSION

    @classmethod
    def capture(cls, state: SamplerState, rng, iteration: int, chain: int, digest: str,
                acc: MembershipAccumulator | None) -> "Checkpoint":
        arrays = {"sender": state.S, "receiver": state.R, "beta": state.beta.copy()}
        scalars = {"K": state.K, "beta_u": state.beta_u, "gamma": state.gamma,
                   "alpha": state.alpha, "kappa": state.kappa,
                   "lambda1": state.lambda1, "lambda2": state.lambda2,
                   "acc_count": 0}
        if acc is not None and acc.count:
            arrays["acc_member"] = acc._member
            arrays["acc_compat"] = acc._compat
            scalars["acc_count"] = acc.count
        rs = rng.bit_generator.state
        rng_state = {"bit_generator": rs["bit_generator"],
                     "state": str(rs["state"]["state"]), "inc": str(rs["state"]["inc"]),
                     "has_uint32": rs["has_uint32"], "uinteger": rs["uinteger"]}
        return cls(iteration, chain, digest, state.model, state.finite, scalars, rng_state,
                   arrays)

    def restore(self, data) -> tuple[SamplerState, np.random.Generator, MembershipAccumulator]:
        sc = self.scalars
        labels = LabelState(self.arrays["sender"], self.arrays["receiver"], sc["K"])
        w = GlobalWeights(self.arrays["beta"], sc["beta_u"], sc["gamma"], sc["alpha"],
                          sc["kappa"], sc["lambda1"], sc["lambda2"])
        state = SamplerState(data, labels, w, model=self.model, finite=self.finite)
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = {
            "bit_generator": self.rng_state["bit_generator"],
            "state": {"state": int(self.rng_state["state"]), "inc": int(self.rng_state["inc"])},
            "has_uint32": self.rng_state["has_uint32"], "uinteger": self.rng_state["uinteger"],
        }
        acc = MembershipAccumulator()
        if sc["acc_count"]:
            acc._member = self.arrays["acc_member"].copy()
            acc._compat = self.arrays["acc_compat"].copy()
            acc.count = sc["acc_count"]
        return state, rng, acc

    def save(self, path) -> None:
        table = []
        offset = 0
        blobs = []
        for name, arr in self.arrays.items():
            a = np.ascontiguousarray(arr)
            a = a.astype(a.dtype.newbyteorder("<"), copy=False)
            raw = a.tobytes()
            table.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                          "offset": offset, "nbytes": len(raw)})
            blobs.append(raw)
            offset += len(raw)
        header = json.dumps({
            "iteration": self.iteration, "chain": self.chain, "digest": self.digest,
            "model": self.model, "finite": self.finite, "scalars": self.scalars,
            "rng": self.rng_state, "arrays": table,
        }, sort_keys=True).encode()
        tmp = Path(str(path) + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(CKPT_MAGIC + struct.pack("<H", self.version) + b"<"
                     + struct.pack("<I", len(header)))
            fh.write(header)
            for raw in blobs:
                fh.write(raw)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        blob = Path(path).read_bytes()
        if blob[:8] != CKPT_MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<H", blob[8:10])
        if version != CKPT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        if blob[10:11] != b"<":
            raise DataError(f"{path}: unsupported byte order {blob[10:11]!r}")
        (hlen,) = struct.unpack("<I", blob[11:15])
        head = json.loads(blob[15: 15 + hlen])
        base = 15 + hlen
        arrays = {}
        for entry in head["arrays"]:
            start = base + entry["offset"]
            raw = blob[start: start + entry["nbytes"]]
            if len(raw) != entry["nbytes"]:
                raise DataError(f"{path}: truncated array '{entry['name']}'")
            arrays[entry["name"]] = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(
                entry["shape"]).copy()
        return cls(head["iteration"], head["chain"], head["digest"], head["model"],
                   head["finite"], head["scalars"], head["rng"], arrays, version)


# ---------------------------------------------------------------------------
# chains


def _paths(out: Path, chain: int) -> dict:
    return {"trace": out / f"trace_chain{chain}.csv",
            "ckpt": out / f"checkpoint_chain{chain}.bin",
            "estimates": out / f"estimates_chain{chain}.json"}


def _chain_rng(cfg: RunConfig, chain: int) -> np.random.Generator:
    seq = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)[chain]
    return np.random.Generator(np.random.PCG64(seq))


def _initial_state(cfg: RunConfig, data, rng) -> SamplerState:
    model = "mti" if "mti" in cfg.model else "mtv"
    if cfg.finite:
        return finite_state(data, cfg.K_fixed, model, rng, cfg.alpha, cfg.kappa,
                            cfg.lambda1, cfg.lambda2)
    w = GlobalWeights(np.full(cfg.K_init, 1.0 / (cfg.K_init + 1)), 1.0 / (cfg.K_init + 1),
                      cfg.gamma, cfg.alpha, cfg.kappa, cfg.lambda1, cfg.lambda2)
    return init_state(data, model, rng, cfg.K_init, w)


def _step(cfg: RunConfig, state: SamplerState, rng) -> None:
    if cfg.model == "mtv-slice":
        slice_sweep_mtv(state, rng, cfg.prior, cfg.freeze)
    else:
        sweep(state, rng, cfg.prior, cfg.freeze, random_order=cfg.random_order)


def _keep_sample(cfg: RunConfig, it: int) -> bool:
    first = int(cfg.iterations * cfg.burn_in)
    return it >= first and (it - first) % cfg.thin == 0


def run_chain(cfg: RunConfig, chain: int, out: Path, ckpt: Checkpoint | None = None) -> dict:
    """Run (or continue) one chain; returns its timing record."""
    bundle = load_data(cfg)
    data = bundle.data
    paths = _paths(out, chain)
    if ckpt is None:
        rng = _chain_rng(cfg, chain)
        state = _initial_state(cfg, data, rng)
        acc = MembershipAccumulator()
        start = 0
        paths["trace"].write_text(",".join(TRACE_COLUMNS) + "\n")
    else:
        state, rng, acc = ckpt.restore(data)
        start = ckpt.iteration
        _truncate_trace(paths["trace"], start)
    pending = ChainTrace(chain=chain)
    t0 = time.perf_counter()
    for it in range(start, cfg.iterations):
        _step(cfg, state, rng)
        pending.append(it + 1, state.K, state_density_D(state), state.loglik(),
                       state.gamma, state.alpha, state.kappa)
        if _keep_sample(cfg, it):
            acc.add(*MembershipAccumulator.sample_from_state(state))
        done = it + 1
        if cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
            _flush(pending, paths["trace"])
            Checkpoint.capture(state, rng, done, chain, cfg.digest(), acc).save(paths["ckpt"])
        if cfg.halt_at is not None and done == cfg.halt_at:
            _flush(pending, paths["trace"])
            raise Halted(f"halted at iteration {done}")
    _flush(pending, paths["trace"])
    elapsed = time.perf_counter() - t0
    Checkpoint.capture(state, rng, cfg.iterations, chain, cfg.digest(), acc).save(paths["ckpt"])
    est = {"chain": chain, "retained_samples": acc.count}
    if acc.count:
        est["membership"] = acc.membership.tolist()
        est["compat"] = acc.compat.tolist()
    paths["estimates"].write_text(json.dumps(est) + "\n")
    n_it = cfg.iterations - start
    return {"chain": chain, "iterations_run": n_it, "seconds": elapsed,
            "seconds_per_iteration": elapsed / n_it if n_it else None}


def _flush(pending: ChainTrace, path: Path) -> None:
    if len(pending):
        pending.write_csv(path, header=False, mode="a")
        for name in ("iteration", "K", "D", "loglik", "gamma", "alpha", "kappa"):
            getattr(pending, name).clear()


def _truncate_trace(path: Path, iteration: int) -> None:
    """Drop trace rows written after the checkpoint being resumed."""
    lines = path.read_text().splitlines(keepends=True) if path.exists() else []
    head = "".join(lines[:1]) or ",".join(TRACE_COLUMNS) + "\n"
    # a kill during a flush can leave a partial last line
    body = [ln for ln in lines[1:]
            if ln.endswith("\n") and ln.count(",") == len(TRACE_COLUMNS) - 1
            and int(ln.split(",", 1)[0]) <= iteration]
    path.write_text(head + "".join(body))


def _run_chains(cfg: RunConfig, out: Path, ckpts: dict) -> list:
    workers = max_workers(cfg.workers or cfg.chains)
    todo = [c for c in range(cfg.chains) if not (c in ckpts and ckpts[c].iteration >= cfg.iterations)]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(todo))) as pool:
            futs = [pool.submit(run_chain, cfg, c, out, ckpts.get(c)) for c in todo]
            return [f.result() for f in futs]
    return [run_chain(cfg, c, out, ckpts.get(c)) for c in todo]


def run(cfg: RunConfig) -> dict:
    """Run every chain, then write ``summary.json``; returns the summary."""
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise ConfigError(f"invalid config field 'output': {out} is not writable ({err})") from None
    bundle = load_data(cfg)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
    timing = _run_chains(cfg, out, {})
    return _finish(cfg, out, bundle, timing)


def resume(out_dir, cfg: RunConfig | None = None) -> dict:
    """Continue every chain of a run directory from its checkpoint."""
    out = Path(out_dir)
    try:
        saved = json.loads((out / "config.json").read_text())
    except (OSError, ValueError) as err:
        raise ConfigError(f"{out}: no readable config.json ({err})") from None
    base = RunConfig(**{**saved, "freeze": tuple(saved.get("freeze", ())), "halt_at": None})
    cfg = cfg or base
    if cfg.digest() != base.digest():
        raise ConfigError("config digest differs from the run being resumed")
    cfg = cfg.replace(output=str(out))
    ckpts = {}
    for c in range(cfg.chains):
        path = _paths(out, c)["ckpt"]
        if path.exists():
            ck = Checkpoint.load(path)
            if ck.digest != cfg.digest():
                raise ConfigError(f"{path}: checkpoint belongs to a different config")
            ckpts[c] = ck
    timing = _run_chains(cfg, out, ckpts)
    return _finish(cfg, out, load_data(cfg), timing)


# ---------------------------------------------------------------------------
# reports


def _safe(fn, *args):
    try:
        v = fn(*args)
    except ValueError as err:
        return {"skipped": str(err)}
    return v


def _chain_report(trace: ChainTrace, burn_in: float, thin: int) -> dict:
    rep = {"iterations": len(trace)}
    K = trace.retained("K", burn_in)
    if K.size:
        vals, counts = np.unique(K, return_counts=True)
        rep["K_mode"] = int(vals[np.argmax(counts)])
        rep["K_distribution"] = {str(int(v)): int(c) for v, c in zip(vals, counts)}
    ll = _safe(loglik_summary, trace.series("loglik"), burn_in, thin)
    rep["loglik"] = ll if isinstance(ll, dict) else {"mean": ll[0], "ci95": list(ll[1])}
    for name in ("K", "D"):
        rep[f"geweke_{name}"] = _safe(geweke_z, trace.retained(name, burn_in))
        rep[f"iat_{name}"] = _safe(iat, trace.retained(name, burn_in))
    return rep


def _recovery(est_paths, truth) -> dict:
    out = {}
    for path in est_paths:
        est = json.loads(Path(path).read_text())
        if not est.get("retained_samples"):
            continue
        out[str(est["chain"])] = {
            "l2_membership": l2_membership(np.array(est["membership"]), truth.membership),
            "l2_compat": l2_compat(np.array(est["compat"]), truth.compat.entries),
        }
    return out


def _report(traces: list, burn_in: float, thin: int, est_paths=(), truth=None) -> dict:
    rep = {"chains": {str(t.chain): _chain_report(t, burn_in, thin) for t in traces}}
    if len(traces) >= 2:
        lengths = {len(t) for t in traces}
        for name in ("K", "D"):
            if len(lengths) != 1:
                rep[f"psrf_{name}"] = {"skipped": "chains have different lengths"}
                continue
            x = np.array([t.retained(name, burn_in) for t in traces])
            r = _safe(psrf, x)
            rep[f"psrf_{name}"] = r if isinstance(r, dict) else {"estimate": r[0], "upper": r[1]}
    else:
        rep["psrf_K"] = rep["psrf_D"] = {"skipped": "needs at least two chains"}
    ll = np.concatenate([t.series("loglik")[int(len(t) * burn_in):][::thin] for t in traces]) \
        if traces else np.zeros(0)
    pooled = _safe(loglik_summary, ll, 0.0, 1)
    rep["loglik"] = pooled if isinstance(pooled, dict) else {"mean": pooled[0], "ci95": list(pooled[1])}
    if truth is not None:
        rep["recovery"] = _recovery(est_paths, truth)
    return rep


def _finish(cfg: RunConfig, out: Path, bundle: DatasetBundle, timing: list) -> dict:
    traces = [ChainTrace.read_csv(_paths(out, c)["trace"]) for c in range(cfg.chains)]
    est = [_paths(out, c)["estimates"] for c in range(cfg.chains)]
    rep = _report(traces, cfg.burn_in, cfg.thin, est, bundle.truth)
    rep["model"] = cfg.model
    rep["dataset"] = bundle.name
    rep["timing"] = sorted(timing, key=lambda r: r["chain"])
    (out / "summary.json").write_text(json.dumps(rep, indent=1, sort_keys=True) + "\n")
    return rep


def evaluate(trace_paths, truth_path=None, burn_in: float = 0.5, thin: int = 1,
             estimate_paths=()) -> dict:
    """Diagnostics and fit from trace files; recovery metrics when a truth file is given."""
    traces = []
    for p in trace_paths:
        try:
            traces.append(ChainTrace.read_csv(p))
        except (OSError, ValueError) as err:
            raise DataError(f"cannot read trace {p}: {err}") from None
    truth = None
    if truth_path is not None:
        try:
            truth = load_dataset(truth_path).truth
        except DatasetFormatError as err:
            raise DataError(str(err)) from None
        if truth is None:
            raise DataError(f"{truth_path}: dataset has no ground truth section")
    if truth is None:
        return {"loglik": _report(traces, burn_in, thin)["loglik"]}
    if not estimate_paths:
        estimate_paths = [Path(p).with_name(Path(p).name.replace("trace_", "estimates_").replace(".csv", ".json"))
                          for p in trace_paths]
    return _report(traces, burn_in, thin, [p for p in estimate_paths if Path(p).exists()], truth)


def gen(cfg: RunConfig, path) -> DatasetBundle:
    """Generate the configured dataset and write it to ``path``."""
    bundle = load_data(cfg.replace(dataset=None))
    try:
        save_dataset(bundle, path)
    except OSError as err:
        raise ConfigError(f"cannot write {path}: {err}") from None
    return bundle
