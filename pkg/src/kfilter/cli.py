"""Command-line entry point: ``kfilter <subcommand> [options]``.

Every output file carries a ``meta`` block with the tool version, estimator
version, run seed and a hash of the resolved configuration (thread count
and output directory excluded).  Option precedence: command-line flags,
then the ``--config`` JSON file, then built-in defaults.  The default output
directory comes from ``$KFILTER_OUT`` when set.

Randomness: each stage draws from
``SeedSequence([seed, crc32(stage_name)])``, so adding, removing or
reordering stages never shifts another stage's random stream.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import traceback
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import DEFAULT_ESTIMATOR, ESTIMATOR_VERSIONS, ESTIMATORS, estimate_word
from .filters import FilterConfig, classify_loop, classify_path, loop_gap, loop_tolerance
from .harmonics import FIGURE_HARMONICS, HarmonicSpec, mesh_harmonic, to_csv, to_obj
from .io import read_polyline, read_words, write_polyline, write_words
from .motion import (JITTER, SUBSTITUTION, NoiseSpec, apply_E_path, apply_E_word, build_so3_alphabet,
                     example_loopword, quantize_path, reconstruct, so3_quantizer)
from .octonion import DEFAULT_ANGLES, g2_alphabet, probe_density, probe_freeness, random_automorphism
from .robot import MAX_SEARCH_BITS, TinyProgram, oracle_table
from .robot import run as run_program
from .spline import complexity_reduction, fit_bspline
from .words import Alphabet, Word

DEFAULTS = {
    "theta": 2 * math.pi / 100,
    "estimator": DEFAULT_ESTIMATOR,
    "seed": 0,
    "sigma": 0.3,
    "jitter": 0.05,
    "rho": 4.0,
    "memory_bits": None,
    "degree": 4,
    "ctrl": 16,
    "epsilon": None,
    "threads": 1,
    "n": None,
    "image": None,
    "angles": list(DEFAULT_ANGLES),
    "max_len": None,
    "density_len": 12,
    "targets": 10,
    "tokens": 2,
    "max_bits": MAX_SEARCH_BITS,
    "all_lengths": False,
    "lm": None,
    "resolution": [64, 128],
    "input": None,
}
# keys that never change results
UNHASHED = {"threads", "out", "config"}


class Run:
    """Resolved configuration plus output helpers for one invocation."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.stage = "setup"

    def __getitem__(self, key):
        return self.cfg[key]

    def hashed_config(self) -> dict:
        d = {k: v for k, v in self.cfg.items() if k not in UNHASHED}
        if d.get("input"):
            p = Path(d["input"])
            d["input"] = hashlib.sha256(p.read_bytes()).hexdigest() if p.exists() else str(p)
        if d.get("image"):
            p = Path(d["image"])
            d["image"] = hashlib.sha256(p.read_bytes()).hexdigest() if p.exists() else str(p)
        d["command"] = self.command
        return d

    def meta(self) -> dict:
        blob = json.dumps(self.hashed_config(), sort_keys=True, default=str).encode()
        return {
            "tool": "kfilter",
            "tool_version": __version__,
            "estimator": self.cfg["estimator"],
            "estimator_version": ESTIMATOR_VERSIONS[self.cfg["estimator"]],
            "seed": self.cfg["seed"],
            "config_hash": hashlib.sha256(blob).hexdigest()[:16],
        }

    def meta_line(self) -> str:
        return json.dumps(self.meta(), sort_keys=True)

    def seed_for(self, stage: str) -> int:
        ss = np.random.SeedSequence([int(self.cfg["seed"]), zlib.crc32(stage.encode())])
        return int(ss.generate_state(1)[0])

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def write_json(self, name: str, payload: dict) -> Path:
        body = {"meta": self.meta(), **payload}
        p = self.path(name)
        p.write_text(json.dumps(body, indent=1, sort_keys=True, default=_jsonable) + "\n")
        return p

    def enter(self, stage: str):
        self.stage = stage


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite(x):
    return x if x is None or math.isfinite(x) else None


# -- shared pieces ----------------------------------------------------------------

def _so3(run: Run):
    return build_so3_alphabet(run["theta"]), so3_quantizer(run["theta"])


def _load_path(run: Run, q):
    """Input polyline, or the bundled Rx^100 loop when no input is given."""
    if run["input"]:
        p = read_polyline(run["input"])
        src = {"kind": "file", "sha256": hashlib.sha256(Path(run["input"]).read_bytes()).hexdigest()}
    else:
        p = reconstruct(example_loopword(q.alphabet), q)
        src = {"kind": "demo", "name": "Rx^100 loop"}
    if len(p) < 2:
        raise ValueError(f"path needs at least 2 points, got {len(p)}")
    return p, src


def _load_words(run: Run, alphabet: Alphabet, key: str = "input") -> list[Word]:
    if run[key]:
        return read_words(run[key], alphabet)
    return [example_loopword(alphabet)]


def _estimate_record(w: Word, estimator: str) -> dict:
    return estimate_word(w, estimator).report()


def _classify(w: Word, image: Word, fcfg: FilterConfig, q) -> dict:
    """Spin/NoSpin for words that close a loop, Causal/Reversible otherwise."""
    gap, tol = loop_gap(w, q), loop_tolerance(q)
    if len(w) and gap <= tol:
        v = classify_loop(w, image, fcfg, q)
    else:
        v = classify_path(w, image, fcfg)
    rec = v.record()
    rec["endpoint_gap"] = gap
    return rec


# -- subcommands --------------------------------------------------------------------

def cmd_pipeline(run: Run) -> int:
    run.enter("ingest")
    alphabet, q = _so3(run)
    path, src = _load_path(run, q)

    run.enter("quantize")
    clean = quantize_path(path, q)
    if not len(clean):
        raise ValueError("quantization produced the empty word")

    run.enter("perturb")
    noise = NoiseSpec(SUBSTITUTION, run["sigma"], run.seed_for("perturb"))
    noisy = apply_E_word(clean, noise)

    run.enter("estimate")
    est_clean = estimate_word(clean, run["estimator"])
    est_noisy = estimate_word(noisy, run["estimator"])

    run.enter("classify")
    m = run["memory_bits"] if run["memory_bits"] is not None else est_clean.bits
    fcfg = FilterConfig(m, run["rho"], run["estimator"])
    v_clean = classify_path(clean, clean, fcfg)
    v_noisy = classify_path(clean, noisy, fcfg)
    kinds = {"clean": v_clean.kind.value, "noisy": v_noisy.kind.value}
    verdicts = {"clean": v_clean.record("clean"), "noisy": v_noisy.record("noisy")}
    if loop_gap(clean, q) <= loop_tolerance(q):
        kinds["loop_clean"] = classify_loop(clean, clean, fcfg, q).kind.value
        kinds["loop_noisy"] = classify_loop(clean, noisy, fcfg, q).kind.value

    run.enter("spline")
    jitter = NoiseSpec(JITTER, run["jitter"], run.seed_for("spline"))
    jittered = apply_E_path(path, jitter)
    curve = fit_bspline(jittered, run["degree"], run["ctrl"])
    eps = run["epsilon"] if run["epsilon"] is not None else 4 * run["jitter"]
    tube = complexity_reduction(jittered, curve, q, run["estimator"], epsilon=eps)

    run.enter("write")
    header = run.meta_line()
    write_words(run.path("clean.words"), [clean], header)
    write_words(run.path("noisy.words"), [noisy], header)
    run.write_json("curve.json", {"curve": curve.to_dict()})
    run.write_json("pipeline_report.json", {
        "config": run.hashed_config(),
        "path": {"source": src, "points": len(path), "closed": path.closed,
                 "endpoint_gap": path.endpoint_gap()},
        "quantize": {"tokens": len(clean), "word": str(clean),
                     "reconstruction_gap": loop_gap(clean, q)},
        "perturb": {"model": noise.model, "amplitude": noise.amplitude, "seed": noise.seed,
                    "changed_tokens": sum(a != b for a, b in zip(clean.tokens, noisy.tokens)),
                    "word": str(noisy)},
        "estimate": {"clean": est_clean.report(), "noisy": est_noisy.report()},
        "classify": {"memory_bits": m, "rho": run["rho"], "kinds": kinds, "verdicts": verdicts},
        "spline": {"jitter": jitter.amplitude, "jitter_seed": jitter.seed,
                   "degree": run["degree"], "n_ctrl": run["ctrl"],
                   "tube": {k: _finite(v) if isinstance(v, float) else v for k, v in tube.to_dict().items()}},
    })
    return 0


def cmd_quantize(run: Run) -> int:
    run.enter("ingest")
    alphabet, q = _so3(run)
    path, src = _load_path(run, q)
    run.enter("quantize")
    w = quantize_path(path, q, run["n"])
    run.enter("write")
    write_words(run.path("quantized.words"), [w], run.meta_line())
    run.write_json("quantize_report.json", {
        "source": src, "points": len(path), "closed": path.closed, "tokens": len(w),
        "word": str(w), "reconstruction_gap": loop_gap(w, q),
    })
    return 0


def cmd_perturb(run: Run) -> int:
    run.enter("ingest")
    alphabet, q = _so3(run)
    inp = run["input"]
    if inp and Path(inp).suffix == ".csv":
        p = read_polyline(inp)
        run.enter("perturb")
        ns = NoiseSpec(JITTER, run["jitter"], run.seed_for("perturb"))
        out = apply_E_path(p, ns)
        run.enter("write")
        write_polyline(run.path("perturbed.csv"), out, {"meta": run.meta()}, run.meta_line())
        run.write_json("perturb_report.json", {"model": ns.model, "amplitude": ns.amplitude,
                                               "stage_seed": ns.seed, "points": len(out)})
        return 0
    words = _load_words(run, alphabet)
    run.enter("perturb")
    base = run.seed_for("perturb")
    ns = [NoiseSpec(SUBSTITUTION, run["sigma"], base + i) for i in range(len(words))]
    out = [apply_E_word(w, n) for w, n in zip(words, ns)]
    run.enter("write")
    write_words(run.path("perturbed.words"), out, run.meta_line())
    run.write_json("perturb_report.json", {
        "model": SUBSTITUTION, "amplitude": run["sigma"], "stage_seed": base,
        "words": [{"tokens": len(w), "changed_tokens": sum(a != b for a, b in zip(w.tokens, o.tokens))}
                  for w, o in zip(words, out)],
    })
    return 0


def cmd_estimate(run: Run) -> int:
    run.enter("ingest")
    alphabet, _ = _so3(run)
    words = _load_words(run, alphabet)
    run.enter("estimate")
    rows = [{"index": i, "tokens": len(w), **_estimate_record(w, run["estimator"])}
            for i, w in enumerate(words)]
    run.write_json("estimate_report.json", {"estimates": rows})
    return 0


def cmd_classify(run: Run) -> int:
    run.enter("ingest")
    alphabet, q = _so3(run)
    words = _load_words(run, alphabet)
    images = _load_words(run, alphabet, "image") if run["image"] else words
    if len(images) != len(words):
        raise ValueError(f"{len(words)} words but {len(images)} E-images")
    if run["memory_bits"] is None:
        raise ValueError("classify needs --memory-bits")
    run.enter("classify")
    fcfg = FilterConfig(run["memory_bits"], run["rho"], run["estimator"])
    rows = []
    for i, (w, img) in enumerate(zip(words, images)):
        rec = _classify(w, img, fcfg, q)
        rec["word_id"] = i
        rows.append(rec)
    run.write_json("classify_report.json", {"memory_bits": fcfg.memory_bits, "rho": fcfg.rho,
                                            "verdicts": rows})
    return 0


def cmd_spline(run: Run) -> int:
    run.enter("ingest")
    alphabet, q = _so3(run)
    if run["input"]:
        path, src = _load_path(run, q)
    else:
        loop, _ = _load_path(run, q)
        path = apply_E_path(loop, NoiseSpec(JITTER, run["jitter"], run.seed_for("spline")))
        src = {"kind": "demo", "name": "jittered Rx^100 loop", "jitter": run["jitter"]}
    run.enter("spline")
    curve = fit_bspline(path, run["degree"], run["ctrl"])
    eps = run["epsilon"] if run["epsilon"] is not None else 4 * run["jitter"]
    tube = complexity_reduction(path, curve, q, run["estimator"], epsilon=eps)
    run.enter("write")
    run.write_json("curve.json", {"curve": curve.to_dict()})
    write_polyline(run.path("spline_sample.csv"), curve.sample(len(path)), {"meta": run.meta()},
                   run.meta_line())
    run.write_json("spline_report.json", {"source": src, "tube": tube.to_dict()})
    return 0


def cmd_probe_g2(run: Run) -> int:
    run.enter("probe-g2")
    x1, y1 = run["angles"]
    a = g2_alphabet(x1, y1)
    free = probe_freeness(a, run["max_len"] or 8)
    rng = np.random.default_rng(run.seed_for("probe-g2"))
    targets = [random_automorphism(rng) for _ in range(run["targets"])]
    dens = probe_density(a, targets, run["density_len"]) if run["targets"] else None
    run.write_json("probe_g2_report.json", {"angles": [x1, y1], "freeness": free, "density": dens})
    return 0


def cmd_oracle(run: Run) -> int:
    run.enter("oracle")
    max_len = run["max_len"] or 6
    alphabet = Alphabet.plain(f"plain{run['tokens']}", [str(i) for i in range(run["tokens"])])
    table, searched = oracle_table(alphabet, max_len, run["max_bits"], workers=run["threads"])
    rows = []
    for out in sorted(table, key=lambda t: (len(t), t)):
        if not run["all_lengths"] and len(out) != max_len:
            continue
        bits = table[out]
        prog = TinyProgram.from_bits(bits, alphabet)
        word = Word(out, alphabet)
        rows.append({"word": str(word), "bits": len(bits), "program": prog.to_text(),
                     "encoded": bits, "reruns": run_program(prog) == word})
    missing = len(alphabet) ** max_len - sum(1 for r in rows if len(r["word"].split()) == max_len)
    run_ok = all(r["reruns"] for r in rows)
    run.write_json("oracle_table.json", {"max_len": max_len, "tokens": run["tokens"],
                                         "max_bits": run["max_bits"], "programs_searched": searched,
                                         "rows": rows, "uncovered_words_at_max_len": missing,
                                         "all_rows_rerun": run_ok})
    if not run_ok:
        raise RuntimeError("an oracle program failed to reproduce its word")
    return 0


def cmd_harmonics(run: Run) -> int:
    run.enter("harmonics")
    pairs = [tuple(p) for p in run["lm"]] if run["lm"] else list(FIGURE_HARMONICS)
    files = []
    meta = run.meta()
    for l, m in pairs:
        spec = HarmonicSpec(l, m, tuple(run["resolution"]))
        mesh = mesh_harmonic(spec)
        mesh.meta.update(meta)
        p = run.path(spec.filename)
        p.write_text(to_obj(mesh))
        run.path(spec.filename[:-4] + ".csv").write_text(to_csv(mesh, run.meta_line()))
        files.append({"l": l, "m": m, "obj": spec.filename, "vertices": len(mesh.vertices),
                      "triangles": len(mesh.triangles)})
    run.write_json("harmonics_report.json", {"resolution": run["resolution"], "radius": "abs",
                                             "meshes": files})
    return 0


COMMANDS = {
    "pipeline": cmd_pipeline,
    "quantize": cmd_quantize,
    "perturb": cmd_perturb,
    "estimate": cmd_estimate,
    "classify": cmd_classify,
    "spline": cmd_spline,
    "probe-g2": cmd_probe_g2,
    "oracle": cmd_oracle,
    "harmonics": cmd_harmonics,
}


# -- argument handling -----------------------------------------------------------

def _lm(text: str) -> list[int]:
    l, m = text.split(",")
    return [int(l), int(m)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # every default is None so unset flags fall through to the config file
    common.add_argument("--config", help="JSON file of option values")
    common.add_argument("--out", help="output directory (default $KFILTER_OUT or ./kfilter_out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--estimator", choices=ESTIMATORS)
    common.add_argument("--threads", type=int)
    common.add_argument("--theta", type=float, help="rotation step in radians")
    common.add_argument("--input", help="input file (polyline CSV or word file)")

    path_opts = argparse.ArgumentParser(add_help=False)
    path_opts.add_argument("--sigma", type=float, help="token substitution probability")
    path_opts.add_argument("--jitter", type=float, help="coordinate jitter standard deviation")
    path_opts.add_argument("--rho", type=float)
    path_opts.add_argument("--memory-bits", type=float)
    path_opts.add_argument("--degree", type=int)
    path_opts.add_argument("--ctrl", type=int, help="spline control points")
    path_opts.add_argument("--epsilon", type=float, help="tube radius (default 4 x jitter)")
    path_opts.add_argument("--n", type=int, help="quantization steps")
    path_opts.add_argument("--image", help="word file of E-images for classify")

    p = argparse.ArgumentParser(prog="kfilter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kfilter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("pipeline", "quantize", "perturb", "estimate", "classify", "spline"):
        sub.add_parser(name, parents=[common, path_opts])
    g2 = sub.add_parser("probe-g2", parents=[common])
    g2.add_argument("--angles", type=float, nargs=2, metavar=("X1", "Y1"))
    g2.add_argument("--max-len", type=int, help="freeness word length (default 8)")
    g2.add_argument("--density-len", type=int)
    g2.add_argument("--targets", type=int)
    orc = sub.add_parser("oracle", parents=[common])
    orc.add_argument("--max-len", type=int, help="word length (default 6)")
    orc.add_argument("--tokens", type=int, help="alphabet size")
    orc.add_argument("--max-bits", type=int)
    orc.add_argument("--all-lengths", action="store_const", const=True,
                     help="also list words shorter than --max-len")
    har = sub.add_parser("harmonics", parents=[common])
    har.add_argument("--lm", type=_lm, action="append", help="l,m pair (repeatable)")
    har.add_argument("--resolution", type=int, nargs=2, metavar=("NTHETA", "NPHI"))
    return p


def resolve(args: argparse.Namespace, env=os.environ) -> dict:
    cfg = dict(DEFAULTS)
    cfg["out"] = env.get("KFILTER_OUT", "kfilter_out")
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())
        unknown = set(k.replace("-", "_") for k in file_cfg) - set(cfg) - UNHASHED
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    for k, v in vars(args).items():
        if k not in ("command", "config") and v is not None:
            cfg[k] = v
    cfg["config"] = args.config
    if cfg["threads"] < 1:
        raise ValueError("--threads must be >= 1")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = None
    try:
        cfg = resolve(args)
        run = Run(args.command, cfg)
        return COMMANDS[args.command](run)
    except Exception as exc:  # report every failure as a machine-readable file
        stage = run.stage if run is not None else "config"
        err = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        print(f"kfilter {args.command}: {stage} failed: {exc}", file=sys.stderr)
        if os.environ.get("KFILTER_DEBUG"):
            traceback.print_exc()
        try:
            if run is None:
                out = args.out or os.environ.get("KFILTER_OUT", "kfilter_out")
                run = Run(args.command, {**DEFAULTS, "out": out, "config": args.config})
            run.write_json(f"{args.command}_error.json", {"error": err})
        except Exception:
            pass
        return 2


if __name__ == "__main__":
    sys.exit(main())
