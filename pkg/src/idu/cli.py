"""Command-line front end: ``idu prepare``, ``idu train`` and ``idu analyze``.

Every command writes a ``manifest.txt`` of resolved ``key = value`` settings
next to its outputs.  Feeding that manifest back through ``--config``
reproduces the outputs byte for byte; flags given on the command line win
over config values.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, circuits, data, qsim, train
from .analysis import fourier

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

log = logging.getLogger("idu")


class InputError(Exception):
    """Bad flags, missing files or malformed inputs (exit code 2)."""


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    items = [t for t in str(text).replace(",", " ").split() if t]
    if not items:
        raise ValueError("empty list")
    return tuple(int(float(t)) if "e" in t.lower() else int(t) for t in items)


def _optional_int(text):
    if text is None or str(text).lower() in ("", "none"):
        return None
    return int(text)


def _optional_str(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return str(text).strip()


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"must be >= 1, got {v}")
    return v


def _positive_float(text) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError(f"must be > 0, got {v}")
    return v


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        s = str(text).strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return s
    return parse


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if value is None:
        return "none"
    return str(value)


# Per command: (key, converter, default).  Keys double as flag names.
SETTINGS = {
    "prepare": [
        ("dataset", _choice("mnist", "fashion"), "mnist"),
        ("input", _optional_str, None),
        ("output", _optional_str, None),
        ("seed", int, 0),
        ("shuffle-seed", _optional_int, None),
    ],
    "train": [
        ("arch", _choice("idu", "dru"), "idu"),
        ("splits", _optional_int, None),
        ("encoding", _choice("rx", "rxry", "rxcrzry"), "rx"),
        ("depth", int, 20),
        ("lr", _positive_float, 0.001),
        ("epochs", _positive_int, 25),
        ("batch", _positive_int, 32),
        ("seeds", _int_list, (0, 1, 2, 3, 4)),
        ("subset", _optional_int, None),
        ("data", _optional_str, None),
        ("out", _optional_str, None),
        ("threads", _positive_int, None),
    ],
    "analyze": [
        ("mode", _choice("fim", "effdim", "fourier"), None),
        ("out", _optional_str, None),
        ("seed", int, 0),
        # fim / effdim
        ("data", _optional_str, None),
        ("arch", _choice("idu", "dru"), "idu"),
        ("splits", _int_list, circuits.STANDARD_SPLITS),
        ("encoding", _choice("rx", "rxry", "rxcrzry"), "rx"),
        ("depth", int, 20),
        ("thetas", _positive_int, 20),
        ("samples", _positive_int, 50),
        ("bins", _positive_int, 6),
        ("cut", _positive_float, 1.0),
        ("n", _int_list, analysis.fisher.DEFAULT_NS),
        ("synthetic-identity", _flag, False),
        # fourier
        ("qubits", _positive_int, 1),
        ("rows", _positive_int, 1),
        ("cols", _optional_int, None),
        ("bound", _optional_int, None),
        ("params", _choice("zero", "random"), "zero"),
        ("readout", int, 0),
    ],
}

# keys that only matter for some analysis modes; left out of other manifests
_MODE_KEYS = {
    "fim": {"data", "arch", "splits", "encoding", "depth", "thetas", "samples", "bins", "cut",
            "synthetic-identity"},
    "effdim": {"data", "arch", "splits", "encoding", "depth", "thetas", "samples", "n",
               "synthetic-identity"},
    "fourier": {"arch", "qubits", "rows", "cols", "bound", "params", "readout"},
}


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; underscores equal dashes."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags over the config file over built-in defaults."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    known = {k for k, _, _ in SETTINGS[command]}
    unknown = sorted(set(config) - known)
    if unknown:
        raise InputError(f"unknown config keys for {command}: {', '.join(unknown)}")
    out = {}
    for key, conv, default in SETTINGS[command]:
        flag = getattr(args, key.replace("-", "_"), None)
        raw = flag if flag is not None else config.get(key)
        try:
            out[key] = conv(raw) if raw is not None else default
        except ValueError as exc:
            raise InputError(f"--{key}: {exc}") from exc
    return out


def format_manifest(command: str, settings: dict, keys=None) -> str:
    lines = [f"# idu {command}"]
    for key, _, _ in SETTINGS[command]:
        if keys is None or key in keys:
            lines.append(f"{key} = {_fmt(settings[key])}")
    return "\n".join(lines) + "\n"


def write_outputs(directory, files: dict[str, str]) -> None:
    """Write every file via temp-and-rename so none is left half written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        data.write_bytes_atomic(directory / name, text.encode())


def _require(settings, *keys):
    for k in keys:
        if settings[k] is None:
            raise InputError(f"--{k} is required")


def _load_cache(settings):
    path = settings["data"] or os.environ.get("IDU_DATA_DIR")
    if not path:
        raise InputError("no dataset cache: pass --data or set IDU_DATA_DIR")
    settings["data"] = path
    try:
        return data.load_split(path)
    except FileNotFoundError as exc:
        raise InputError(f"{exc}; run `idu prepare` first") from exc


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_prepare(settings) -> int:
    _require(settings, "input", "output")
    try:
        split = data.prepare(settings["input"], seed=settings["seed"],
                             shuffle_seed=settings["shuffle-seed"])
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    data.save_split(split, settings["output"])
    write_outputs(settings["output"], {"manifest.txt": format_manifest("prepare", settings)})
    for name, n in zip(data.SPLIT_NAMES, split.sizes()):
        print(f"{name} {n}")
    return EXIT_OK


def _build_train_circuit(settings):
    arch = settings["arch"]
    if arch == "dru":
        if settings["splits"] is not None:
            raise InputError("--splits only applies to --arch idu")
        return circuits.build_dru(settings["encoding"], settings["depth"])
    if settings["splits"] is None:
        raise InputError("--arch idu needs --splits")
    return circuits.build_idu(settings["splits"], settings["encoding"], settings["depth"])


def cmd_train(settings) -> int:
    _require(settings, "out")
    try:
        circuit = _build_train_circuit(settings)
        if settings["threads"] is None:
            settings["threads"] = os.cpu_count() or 1
        config = train.TrainConfig(settings["lr"], settings["epochs"], settings["batch"],
                                   settings["seeds"], settings["threads"])
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    split = _load_cache(settings)
    if settings["subset"] is not None:
        try:
            split = split.subset(settings["subset"])
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    log.info("training %s on %s", circuit.meta.label, split.sizes())
    result = train.run_experiment(circuit, split, config)
    files = {f"run_seed{r.seed}.txt": train.format_run_metrics(r) for r in result.runs}
    files["aggregate.txt"] = train.format_aggregate(result)
    files["summary.txt"] = train.format_summary(result)
    # threads never changes results, so it stays out of the manifest
    keys = {k for k, _, _ in SETTINGS["train"]} - {"threads"}
    files["manifest.txt"] = format_manifest("train", settings, keys)
    write_outputs(settings["out"], files)
    print(f"{result.label} test accuracy {100 * result.test_mean:.2f} +- "
          f"{100 * result.test_std:.2f} %")
    return EXIT_OK


def _analysis_circuits(settings):
    if settings["arch"] == "dru":
        return {"DRU": circuits.build_dru(settings["encoding"], settings["depth"])}
    return {str(k): circuits.build_idu(k, settings["encoding"], settings["depth"])
            for k in settings["splits"]}


def _collect_fims(settings):
    if settings["synthetic-identity"]:
        # control run: every FIM is exactly the identity
        d = 10 * settings["depth"]
        labels = ["DRU"] if settings["arch"] == "dru" else [str(k) for k in settings["splits"]]
        return {lab: [np.eye(d)] * settings["thetas"] for lab in labels}
    split = _load_cache(settings)
    features = split.train.features
    if settings["samples"] > len(features):
        raise InputError(f"--samples {settings['samples']} exceeds {len(features)} images")
    try:
        built = _analysis_circuits(settings)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = {}
    for label, circuit in built.items():
        log.info("FIMs for %s", label)
        out[label] = analysis.fims_over_thetas(circuit, features, settings["thetas"],
                                               settings["samples"], settings["seed"])
    return out


def cmd_analyze(settings) -> int:
    _require(settings, "mode", "out")
    mode = settings["mode"]
    try:
        if mode == "fourier":
            files, summary = _fourier(settings)
        else:
            if settings["thetas"] < 2 and mode == "effdim":
                raise InputError("--thetas must be >= 2 for effdim")
            if any(n < 3 for n in settings["n"]):
                raise InputError("every --n must be >= 3")
            fims = _collect_fims(settings)
            if mode == "fim":
                spectra = {lab: analysis.fim_spectrum(analysis.normalize_fims(f),
                                                       settings["bins"], settings["cut"])
                           for lab, f in fims.items()}
                files = {"spectrum.txt": analysis.format_spectrum_table(spectra)}
                lo = min(float(s.eigenvalues.min()) for s in spectra.values())
                summary = f"min eigenvalue {lo:.6e}"
            else:
                curves = {lab: analysis.effective_dimension(f, settings["n"])
                          for lab, f in fims.items()}
                files = {"effdim.txt": analysis.format_effdim_table(curves)}
                n_max = int(max(settings["n"]))
                summary = "ed at n=%d: %s" % (n_max, " ".join(
                    f"{lab}={c.ed_normalized[-1]:.6f}" for lab, c in curves.items()))
    except fourier.GridTooLarge as exc:
        raise InputError(str(exc)) from exc
    keys = {"mode", "out", "seed"} | _MODE_KEYS[mode]
    files["manifest.txt"] = format_manifest("analyze", settings, keys)
    write_outputs(settings["out"], files)
    print(summary)
    return EXIT_OK


def _fourier(settings):
    nq, rows = settings["qubits"], settings["rows"]
    cols = settings["cols"] if settings["cols"] is not None else nq
    if cols != nq:
        raise InputError("--cols must equal --qubits (one input column per qubit)")
    settings["cols"] = cols
    if not 0 <= settings["readout"] < nq:
        raise InputError(f"--readout must lie in [0, {nq})")
    try:
        if settings["arch"] == "dru":
            circuit = fourier.toy_dru(nq, rows)
            rows_eff = 1
        else:
            circuit = fourier.toy_idu(nq, rows)
            rows_eff = rows
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    bounds = fourier.predicted_bounds(circuit)
    bound = settings["bound"] if settings["bound"] is not None else max(bounds) + 1
    settings["bound"] = bound
    rng = np.random.default_rng(settings["seed"])
    if settings["params"] == "zero":
        params = np.zeros(circuit.num_params)
    else:
        params = rng.uniform(0, np.pi, circuit.num_params)
    spec = fourier.fourier_probe(circuit, params, bound, rows_eff, circuit.num_features // rows_eff,
                                 settings["readout"])
    x = rng.uniform(0, 2 * np.pi, (20, circuit.num_features))
    f = qsim.expectations(circuit, x, params)[:, settings["readout"]]
    recon = float(np.abs(spec.reconstruct(x) - f).max())
    text = fourier.format_report(spec, bounds, recon)
    summary = (f"max out-of-spectrum residual {spec.max_outside(bounds):.3e} "
               f"(energy fraction {spec.energy_outside(bounds):.3e}), "
               f"reconstruction error {recon:.3e}")
    return {"fourier.txt": text}, summary


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idu", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("prepare", help="IDX files -> angle cache")
    pp.add_argument("--dataset", help="mnist or fashion (same IDX layout)")
    pp.add_argument("--input", help="directory holding the four IDX files")
    pp.add_argument("--output", help="cache directory to write")
    pp.add_argument("--seed", help="split seed (default 0)")
    pp.add_argument("--shuffle-seed", help="apply a fixed pixel permutation drawn from this seed")
    pp.add_argument("--config")

    pt = sub.add_parser("train", help="multi-seed training run")
    pt.add_argument("--arch", help="idu or dru")
    pt.add_argument("--splits", help="IDU splits: 1, 2, 4, 8 or 10")
    pt.add_argument("--encoding", help="rx, rxry or rxcrzry")
    pt.add_argument("--depth", help="parameters per variational layer: 20 or 60")
    pt.add_argument("--lr", help="ADAM learning rate (default 0.001)")
    pt.add_argument("--epochs", help="default 25")
    pt.add_argument("--batch", help="default 32")
    pt.add_argument("--seeds", help="comma separated, default 0,1,2,3,4")
    pt.add_argument("--subset", help="train on N images; validation and test scale 12:48 and 10:48")
    pt.add_argument("--data", help="prepared cache directory (default $IDU_DATA_DIR)")
    pt.add_argument("--out", help="output directory")
    pt.add_argument("--threads", help="worker threads per batch (default: all CPUs)")
    pt.add_argument("--config")

    pa = sub.add_parser("analyze", help="Fisher spectrum, effective dimension or Fourier probe")
    pa.add_argument("--mode", help="fim, effdim or fourier")
    pa.add_argument("--out", help="output directory")
    pa.add_argument("--seed")
    pa.add_argument("--data", help="prepared cache directory (default $IDU_DATA_DIR)")
    pa.add_argument("--arch")
    pa.add_argument("--splits", help="comma separated IDU splits (default 1,2,4,8,10)")
    pa.add_argument("--encoding")
    pa.add_argument("--depth")
    pa.add_argument("--thetas", help="parameter points per architecture (default 20)")
    pa.add_argument("--samples", help="inputs per FIM (default 50)")
    pa.add_argument("--bins", help="histogram bins (default 6)")
    pa.add_argument("--cut", help="histogram upper edge (default 1.0)")
    pa.add_argument("--n", help="comma separated resolutions (default 1000,...,1000000)")
    pa.add_argument("--synthetic-identity", action="store_const", const="true", default=None,
                    help="replace every FIM by the identity (control run, no data needed)")
    pa.add_argument("--qubits", help="fourier: toy qubit count")
    pa.add_argument("--rows", help="fourier: encoding rows (IDU) or re-uploads (DRU)")
    pa.add_argument("--cols", help="fourier: inputs per row, equal to --qubits")
    pa.add_argument("--bound", help="fourier: probed frequency bound (default predicted + 1)")
    pa.add_argument("--params", help="fourier: zero or random variational angles")
    pa.add_argument("--readout", help="fourier: qubit whose <Z> is probed (default 0)")
    pa.add_argument("--config")
    return p


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "analyze": cmd_analyze}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        settings = resolve(args.command, args)
        return COMMANDS[args.command](settings)
    except (InputError, data.IdxFormatError, data.CacheFormatError) as exc:
        print(f"idu {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        log.debug("internal error", exc_info=True)
        print(f"idu {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
