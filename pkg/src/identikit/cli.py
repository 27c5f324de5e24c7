"""Command-line interface.

One executable with subcommands: generate / ica / lingam / nica / discover /
indep / demo / bench.  Every run resolves its parameters (flags override a
key=value config file, which overrides built-in defaults), executes, and
writes a manifest JSON recording the resolved parameters; feeding a manifest
back through --from-manifest reproduces the outputs bit-identically.

Exit codes: 0 success, 1 data or precondition errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import difflib
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .causal import FlowConfig, discover_anm, discover_carefl, discover_nonsens
from .core import (
    Dataset,
    IdentikitError,
    amari_index,
    mcc,
    read_dataset_csv,
    write_dataset_csv,
)
from .independence import hsic_test
from .lab import bivariate_symmetry_demo, evd_check, gaussian_rotation_demo, isometry_check
from .linear_ica import estimate_ica
from .lingam import estimate_lingam
from .nonlinear_ica import TrainConfig, train_nica
from .rng import stream
from .synth import (
    MlpFunction,
    NonstationarySpec,
    SourceDistribution,
    darmois_construct,
    gen_anm,
    gen_carefl,
    gen_demo_signals,
    gen_linear_ica,
    gen_lingam,
    gen_nonsens_sem,
    gen_nonstationary_nica,
    gen_pnl,
)

FORMAT_VERSION = 1
_MISSING = argparse.SUPPRESS


class _Parser(argparse.ArgumentParser):
    """argparse with a nearest-flag suggestion on unknown options."""

    def error(self, message):
        if "unrecognized arguments" in message:
            unknown = message.split(":", 1)[1].strip().split()
            known = [o for a in self._actions for o in a.option_strings]
            for u in unknown:
                close = difflib.get_close_matches(u, known, n=1)
                if close:
                    message += f" (did you mean {close[0]}?)"
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _sig12(obj):
    """Round all floats to 12 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, np.floating):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _sig12(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _sig12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sig12(v) for v in obj]
    return obj


def _write_json(path: Path, doc: dict) -> None:
    doc = dict(doc)
    doc.setdefault("format_version", FORMAT_VERSION)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_sig12(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_config(path: str) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IdentikitError(f"bad config line (expected key = value): {line!r}")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve(defaults: dict, args: argparse.Namespace) -> dict:
    """Merge defaults < config file < explicit flags."""
    params = dict(defaults)
    provided = {k: v for k, v in vars(args).items() if k not in ("func", "config", "from_manifest")}
    if getattr(args, "config", None):
        for key, raw in _read_config(args.config).items():
            if key not in defaults:
                continue
            ref = defaults[key]
            if isinstance(ref, bool):
                params[key] = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(ref, int) and not isinstance(ref, bool):
                params[key] = int(raw)
            elif isinstance(ref, float):
                params[key] = float(raw)
            else:
                params[key] = raw
    params.update(provided)
    return params


def _dist_from_name(name: str) -> SourceDistribution:
    if name.startswith("gg:"):
        return SourceDistribution.generalized(float(name.split(":", 1)[1]))
    return SourceDistribution(name)


class _Run:
    """Collects outputs and writes the manifest when the command finishes."""

    def __init__(self, subcommand: str, params: dict, outdir: str):
        self.subcommand = subcommand
        self.params = params
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.inputs = []
        self.outputs = []
        self.t0 = time.monotonic()

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.outputs.append(str(p))
        return p

    def finish(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "parameters": {k: v for k, v in self.params.items() if k != "outdir"},
            "seed": self.params.get("seed"),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "library_version": __version__,
            "duration_s": time.monotonic() - self.t0,
        }
        _write_json(self.outdir / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# generate

GENERATE_DEFAULTS = dict(
    model="linear-ica",
    vars=2,
    samples=5000,
    seed=0,
    dist="laplace",
    edge_prob=0.5,
    segments=40,
    per_segment=1000,
    mix_layers=2,
    identity_mixing=False,
    lam_min=0.3,
    lam_max=3.0,
    noise_scale=0.4,
    alpha_zero=False,
    identity_post=False,
    zero_mechanism=False,
    outdir=".",
)


def _cmd_generate(args):
    params = _resolve(GENERATE_DEFAULTS, args)
    run = _Run("generate", params, params["outdir"])
    model = params["model"]
    seed = params["seed"]
    dist = _dist_from_name(params["dist"])
    truth = {"model": model, "seed": seed}

    if model == "linear-ica":
        data, mix = gen_linear_ica(
            params["vars"], params["samples"], dist, seed, identity_mixing=params["identity_mixing"]
        )
        truth["mixing"] = mix.mixing
        truth["metadata"] = mix.metadata
        sources = mix.sources
    elif model == "demo-signals":
        data, mix = gen_demo_signals(params["samples"], seed)
        truth["mixing"] = mix.mixing
        sources = mix.sources
    elif model == "lingam":
        data, sem = gen_lingam(params["vars"], params["edge_prob"], dist, params["samples"], seed)
        truth["b"] = sem.b
        truth["causal_order"] = list(sem.causal_order)
        sources = None
    elif model == "nica":
        spec = NonstationarySpec.random(
            params["segments"], params["vars"], params["per_segment"], seed,
            lam_range=(params["lam_min"], params["lam_max"]),
        )
        mixer = (
            MlpFunction.identity(params["vars"])
            if params["identity_mixing"]
            else MlpFunction.random(params["vars"], params["mix_layers"], seed)
        )
        data, sources = gen_nonstationary_nica(spec, mixer, seed)
        truth["lam"] = spec.lam
        truth["mix_layers"] = params["mix_layers"]
    elif model == "nonsens":
        data, tag, sources = gen_nonsens_sem(
            params["segments"], params["per_segment"], seed,
            lam_range=(params["lam_min"], params["lam_max"]),
        )
        truth["direction"] = tag
    elif model == "anm":
        data, tag = gen_anm(
            params["samples"], dist, seed,
            noise_scale=params["noise_scale"], zero_mechanism=params["zero_mechanism"],
        )
        truth["direction"] = tag
        sources = None
    elif model == "pnl":
        data, tag = gen_pnl(
            params["samples"], dist, seed,
            noise_scale=params["noise_scale"], identity_post=params["identity_post"],
        )
        truth["direction"] = tag
        sources = None
    elif model == "carefl":
        data, tag = gen_carefl(params["samples"], seed, noise=dist, alpha_zero=params["alpha_zero"])
        truth["direction"] = tag
        sources = None
    else:
        raise IdentikitError(f"unknown model {model!r}")

    write_dataset_csv(data, run.path("data.csv"))
    if sources is not None:
        src = Dataset(sources, segment_labels=data.segment_labels)
        write_dataset_csv(src, run.path("sources.csv"))
        truth["sources_path"] = "sources.csv"
    _write_json(run.path("truth.json"), truth)
    run.finish()
    print(f"wrote {run.outdir}/data.csv ({data.n_obs} x {data.n_vars})")
    return 0


# ---------------------------------------------------------------------------
# ica

ICA_DEFAULTS = dict(contrast="logcosh", tol=1e-6, max_iter=200, seed=0, outdir=".")


def _cmd_ica(args):
    params = _resolve(ICA_DEFAULTS, args)
    run = _Run("ica", params, params["outdir"])
    run.inputs.append(args.data)
    data = read_dataset_csv(args.data)
    res = estimate_ica(
        data, contrast=params["contrast"], tol=params["tol"],
        max_iter=params["max_iter"], seed=params["seed"],
    )
    write_dataset_csv(Dataset(res.components), run.path("components.csv"))
    _write_json(
        run.path("ica_result.json"),
        {
            "unmixing": res.unmixing,
            "mixing_est": res.mixing_est,
            "contrast_values": res.contrast_values,
            "iterations": res.iterations,
            "converged": res.converged,
            "mean": res.mean,
        },
    )
    run.finish()
    print(f"ica: converged={res.converged} after {res.iterations} iterations")
    return 0


# ---------------------------------------------------------------------------
# lingam

LINGAM_DEFAULTS = dict(
    prune_threshold=0.05, contrast="logcosh", tol=1e-6, max_iter=200, seed=0, outdir="."
)


def _cmd_lingam(args):
    params = _resolve(LINGAM_DEFAULTS, args)
    run = _Run("lingam", params, params["outdir"])
    run.inputs.append(args.data)
    data = read_dataset_csv(args.data)
    sem = estimate_lingam(
        data,
        ica_config=dict(
            contrast=params["contrast"], tol=params["tol"],
            max_iter=params["max_iter"], seed=params["seed"],
        ),
        prune_threshold=params["prune_threshold"],
    )
    _write_json(
        run.path("lingam_result.json"),
        {
            "b": sem.b,
            "causal_order": list(sem.causal_order),
            "pruned": sem.pruned,
            "disturbance_kurtosis": list(sem.disturbance_kurtosis),
            "diagnostics": {
                "ica_converged": sem.diagnostics["ica_converged"],
                "ica_iterations": sem.diagnostics["ica_iterations"],
            },
        },
    )
    with open(run.path("adjacency.txt"), "w", encoding="utf-8") as fh:
        for cause, effect, coef in sem.edges():
            fh.write(f"x{cause + 1} -> x{effect + 1} {coef:.12g}\n")
    run.finish()
    order = " < ".join(f"x{v + 1}" for v in sem.causal_order)
    print(f"lingam: causal order {order}, {len(sem.edges())} edges, pruned={sem.pruned}")
    return 0


# ---------------------------------------------------------------------------
# nica

NICA_DEFAULTS = dict(
    epochs=500, lr=1e-3, momentum=0.9, batch=64, hidden="", weight_decay=1e-5,
    seed=0, outdir=".",
)


def _cmd_nica(args):
    params = _resolve(NICA_DEFAULTS, args)
    run = _Run("nica", params, params["outdir"])
    run.inputs.append(args.data)
    data = read_dataset_csv(args.data)
    hidden = tuple(int(h) for h in params["hidden"].split(",") if h) or None
    cfg = TrainConfig(
        learning_rate=params["lr"], momentum=params["momentum"],
        batch_size=params["batch"] or None, epochs=params["epochs"],
        seed=params["seed"], hidden=hidden, weight_decay=params["weight_decay"],
    )
    res = train_nica(data, cfg)
    write_dataset_csv(
        Dataset(res.components, segment_labels=data.segment_labels),
        run.path("components.csv"),
    )
    _write_json(run.path("extractor.json"), res.extractor.to_dict())
    _write_json(
        run.path("nica_result.json"),
        {
            "classifier_accuracy": res.classifier_accuracy,
            "final_loss": float(res.loss_history[-1]),
            "epochs": len(res.loss_history),
            "ica_converged": res.linear_stage.converged,
        },
    )
    run.finish()
    print(f"nica: classifier accuracy {res.classifier_accuracy:.4f}")
    return 0


# ---------------------------------------------------------------------------
# discover

DISCOVER_DEFAULTS = dict(
    method="anm", alpha=0.05, permutations=500, bandwidth_policy=1.0,
    split_ratio=0.5, margin=0.01, base="laplace", epochs=0, seed=0, outdir=".",
)


def _report_doc(rep):
    return {
        "statistic": rep.statistic,
        "p_value": rep.p_value,
        "n_permutations": rep.n_permutations,
        "alpha": rep.alpha,
        "reject": rep.reject,
        "bandwidths": list(rep.bandwidths),
        "metadata": rep.metadata,
    }


def _cmd_discover(args):
    params = _resolve(DISCOVER_DEFAULTS, args)
    run = _Run("discover", params, params["outdir"])
    run.inputs.append(args.data)
    data = read_dataset_csv(args.data)
    method = params["method"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if method == "nonsens":
            cfg = None
            if params["epochs"]:
                cfg = TrainConfig(seed=params["seed"], epochs=params["epochs"])
            verdict = discover_nonsens(
                data, nica_cfg=cfg, n_permutations=params["permutations"],
                alpha=params["alpha"], seed=params["seed"],
            )
        elif method == "anm":
            verdict = discover_anm(
                data, bandwidth_policy=params["bandwidth_policy"],
                n_permutations=params["permutations"], alpha=params["alpha"],
                seed=params["seed"],
            )
        elif method == "carefl":
            cfg = FlowConfig(base=params["base"], margin=params["margin"])
            if params["epochs"]:
                cfg = FlowConfig(base=params["base"], margin=params["margin"], epochs=params["epochs"])
            verdict = discover_carefl(
                data, flow_cfg=cfg, split_ratio=params["split_ratio"], seed=params["seed"]
            )
        else:
            raise IdentikitError(f"unknown method {method!r}")
    doc = {
        "direction": verdict.direction,
        "method": verdict.method,
        "confidence_note": verdict.confidence_note,
        "extras": verdict.extras,
    }
    if verdict.tests:
        doc["tests"] = {k: _report_doc(r) for k, r in verdict.tests.items()}
    _write_json(run.path("verdict.json"), doc)
    run.finish()
    print(f"discover[{method}]: {verdict.direction}"
          + (f" ({verdict.confidence_note})" if verdict.confidence_note else ""))
    return 0


# ---------------------------------------------------------------------------
# indep

INDEP_DEFAULTS = dict(col_x=1, col_y=2, permutations=500, alpha=0.05, seed=0, outdir=".")


def _cmd_indep(args):
    params = _resolve(INDEP_DEFAULTS, args)
    run = _Run("indep", params, params["outdir"])
    run.inputs.append(args.data)
    data = read_dataset_csv(args.data)
    cx, cy = params["col_x"] - 1, params["col_y"] - 1
    if not (0 <= cx < data.n_vars and 0 <= cy < data.n_vars):
        raise IdentikitError(f"column out of range 1..{data.n_vars}")
    rep = hsic_test(
        data.values[:, cx], data.values[:, cy],
        n_permutations=params["permutations"], alpha=params["alpha"], seed=params["seed"],
    )
    _write_json(run.path("test.json"), _report_doc(rep))
    run.finish()
    print(f"hsic: statistic {rep.statistic:.6g}, p = {rep.p_value:.4f}, reject = {rep.reject}")
    return 0


# ---------------------------------------------------------------------------
# demo

DEMO_DEFAULTS = dict(
    vars=2, samples=5000, seed=0, scale=1.0, dist="gg:1.0", angle=45.0,
    map="orthogonal", rho=0.6, disturbance="gaussian", emit_plot_data=False,
    outdir=".",
)


def _demo_rotation(params, run, lines):
    rep = gaussian_rotation_demo(
        params["vars"], params["samples"], params["seed"], scale=params["scale"]
    )
    lines.append(f"average log-density, identity model : {rep.loglik_identity:.12g}")
    lines.append(f"average log-density, rotated model  : {rep.loglik_rotated:.12g}")
    lines.append(f"gap                                 : {rep.loglik_gap:.3e}")
    lines.append(f"energy-distance p-value             : {rep.energy_p_value:.4f}")
    lines.append(rep.note)
    return {
        "loglik_identity": rep.loglik_identity,
        "loglik_rotated": rep.loglik_rotated,
        "loglik_gap": rep.loglik_gap,
        "energy_statistic": rep.energy_statistic,
        "energy_p_value": rep.energy_p_value,
        "orthogonal": rep.orthogonal,
        "note": rep.note,
    }


def _demo_evd(params, run, lines):
    from .rng import random_orthogonal

    n = params["vars"]
    angle = np.deg2rad(params["angle"])
    if n == 2:
        a = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    else:
        a = random_orthogonal(n, stream(params["seed"], 56))
    rep = evd_check(a, _dist_from_name(params["dist"]), seed=params["seed"])
    lines.append(f"off-diagonal residual : {rep.offdiag_residual:.6g}")
    lines.append(f"eigenvalue spread     : {rep.eigenvalue_spread:.6g}")
    lines.append(f"verdict               : {rep.verdict}")
    return {
        "offdiag_residual": rep.offdiag_residual,
        "eigenvalue_spread": rep.eigenvalue_spread,
        "verdict": rep.verdict,
        "per_probe_offdiag": rep.per_probe_offdiag,
        "per_probe_spread": rep.per_probe_spread,
    }


def _demo_isometry(params, run, lines):
    from .rng import random_orthogonal

    n = params["vars"]
    kind = params["map"]
    if kind == "orthogonal":
        u = random_orthogonal(n, stream(params["seed"], 57))
        b = stream(params["seed"], 58).standard_normal(n)
        f = lambda x: x @ u.T + b
    elif kind == "scaled":
        u = 2.0 * random_orthogonal(n, stream(params["seed"], 57))
        f = lambda x: x @ u.T
    elif kind == "tanh":
        f = np.tanh
    else:
        raise IdentikitError(f"unknown map {kind!r} (orthogonal, scaled, tanh)")
    rep = isometry_check(f, n_vars=n, seed=params["seed"])
    lines.append(f"orthogonality residual      : {rep.orthogonality_residual:.6g}")
    lines.append(f"second-derivative residual  : {rep.second_derivative_residual:.6g}")
    lines.append(f"skew identity residual      : {rep.skew_identity_residual:.6g}")
    lines.append(f"symmetric identity residual : {rep.symmetric_identity_residual:.6g}")
    lines.append(f"verdict                     : {rep.verdict}")
    return {
        "orthogonality_residual": rep.orthogonality_residual,
        "second_derivative_residual": rep.second_derivative_residual,
        "skew_identity_residual": rep.skew_identity_residual,
        "symmetric_identity_residual": rep.symmetric_identity_residual,
        "verdict": rep.verdict,
        "map": kind,
    }


def _demo_darmois(params, run, lines):
    from scipy import stats as sps

    data, _ = gen_linear_ica(2, params["samples"], SourceDistribution.laplace(), params["seed"])
    z = darmois_construct(data)
    ks = float(sps.kstest(z, "uniform").statistic)
    rep = hsic_test(data.values[:, 0], z, n_permutations=200, seed=params["seed"])
    lines.append(f"KS distance of z from uniform : {ks:.4f}")
    lines.append(f"HSIC(x1, z) p-value           : {rep.p_value:.4f} (reject={rep.reject})")
    lines.append("a fabricated 'independent component' exists in any i.i.d. data:")
    lines.append("independence alone cannot identify nonlinear mixings")
    if params["emit_plot_data"]:
        rows = np.column_stack([data.values[:, 0], data.values[:, 1], z])
        np.savetxt(
            run.path("plot_data.csv"), rows, delimiter=",", fmt="%.12g",
            header="x1,x2,z", comments="",
        )
    return {"ks_distance": ks, "hsic": _report_doc(rep)}


def _demo_symmetry(params, run, lines):
    rep = bivariate_symmetry_demo(
        params["samples"], params["seed"], rho=params["rho"],
        disturbance=params["disturbance"],
    )
    lines.append(f"coefficient x1->x2 : {rep.coef_forward:.6f}")
    lines.append(f"coefficient x2->x1 : {rep.coef_backward:.6f}")
    lines.append(f"residual variances : {rep.resid_var_forward:.6f} / {rep.resid_var_backward:.6f}")
    lines.append(f"log-likelihood gap : {rep.loglik_gap:.3e}")
    doc = {
        "coef_forward": rep.coef_forward,
        "coef_backward": rep.coef_backward,
        "resid_var_forward": rep.resid_var_forward,
        "resid_var_backward": rep.resid_var_backward,
        "loglik_gap": rep.loglik_gap,
        "disturbance": rep.disturbance,
        "note": rep.note,
    }
    if rep.hsic_forward is not None:
        lines.append(
            f"HSIC rejects: forward={rep.hsic_forward.reject} backward={rep.hsic_backward.reject}"
        )
        doc["hsic_forward"] = _report_doc(rep.hsic_forward)
        doc["hsic_backward"] = _report_doc(rep.hsic_backward)
    lines.append(rep.note)
    return doc


def _cmd_demo(args):
    params = _resolve(DEMO_DEFAULTS, args)
    run = _Run("demo", params, params["outdir"])
    lines = [f"demo: {args.which}"]
    handler = {
        "rotation": _demo_rotation,
        "evd": _demo_evd,
        "isometry": _demo_isometry,
        "darmois": _demo_darmois,
        "symmetry": _demo_symmetry,
    }.get(args.which)
    if handler is None:
        raise IdentikitError(f"unknown demo {args.which!r}")
    doc = handler(params, run, lines)
    doc["demo"] = args.which
    _write_json(run.path("report.json"), doc)
    with open(run.path("report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    run.finish()
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# bench

BENCH_DEFAULTS = dict(
    trials=20, seed=0, vars=2, samples=0, segments=40, per_segment=0,
    epochs=0, emit_plot_data=False, outdir=".",
)

BENCH_SUITES = ("linear-ica", "lingam", "nica", "nonsens", "anm", "carefl")


def _bench_trial(suite: str, params: dict, trial: int):
    seed = int(stream(params["seed"], 80, trial).integers(0, 2**31 - 1))
    t0 = time.monotonic()
    if suite == "linear-ica":
        n = params["samples"] or 5000
        data, mix = gen_demo_signals(n, seed)
        res = estimate_ica(data, seed=seed)
        row = {
            "seed": seed,
            "amari_index": amari_index(res.unmixing @ mix.mixing),
            "converged": int(res.converged),
        }
    elif suite == "lingam":
        n = params["samples"] or 10000
        data, sem = gen_lingam(params["vars"], 0.8, SourceDistribution.laplace(), n, seed)
        est = estimate_lingam(data, ica_config={"seed": seed})
        perm = list(est.causal_order)
        truth_permuted = sem.b[np.ix_(perm, perm)]
        order_ok = not np.any(np.triu(truth_permuted) != 0)
        est_edges = np.abs(est.b) > 0
        max_err = float(np.abs(est.b - sem.b)[est_edges | (np.abs(sem.b) > 0)].max()) if (
            est_edges.any() or np.abs(sem.b).max() > 0
        ) else 0.0
        row = {"seed": seed, "order_correct": int(order_ok), "max_b_error": max_err}
    elif suite == "nica":
        per = params["per_segment"] or 1000
        spec = NonstationarySpec.random(params["segments"], params["vars"], per, seed)
        mixer = MlpFunction.random(params["vars"], 2, seed)
        data, s_true = gen_nonstationary_nica(spec, mixer, seed)
        cfg = TrainConfig(seed=seed, epochs=params["epochs"] or 150, batch_size=256)
        res = train_nica(data, cfg)
        score = mcc(res.components, s_true, mode="abs-rank")
        row = {
            "seed": seed,
            "mcc_absrank": score.mcc,
            "classifier_accuracy": res.classifier_accuracy,
        }
    elif suite == "nonsens":
        per = params["per_segment"] or 250
        data, tag, _ = gen_nonsens_sem(params["segments"], per, seed)
        cfg = TrainConfig(seed=seed, epochs=params["epochs"] or 150, batch_size=256)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            verdict = discover_nonsens(data, nica_cfg=cfg, n_permutations=200, seed=seed)
        row = {"seed": seed, "verdict": verdict.direction, "correct": int(verdict.direction == tag)}
    elif suite == "anm":
        n = params["samples"] or 1000
        data, tag = gen_anm(n, SourceDistribution.uniform(), seed)
        verdict = discover_anm(data, n_permutations=200, seed=seed)
        row = {"seed": seed, "verdict": verdict.direction, "correct": int(verdict.direction == tag)}
    elif suite == "carefl":
        n = params["samples"] or 2000
        data, tag = gen_carefl(n, seed)
        verdict = discover_carefl(data, seed=seed)
        row = {"seed": seed, "verdict": verdict.direction, "correct": int(verdict.direction == tag)}
    else:
        raise IdentikitError(f"unknown suite {suite!r} (choose from {', '.join(BENCH_SUITES)})")
    row["seconds"] = time.monotonic() - t0
    return row


def _cmd_bench(args):
    params = _resolve(BENCH_DEFAULTS, args)
    suite = args.suite
    if suite not in BENCH_SUITES:
        raise IdentikitError(f"unknown suite {suite!r} (choose from {', '.join(BENCH_SUITES)})")
    run = _Run("bench", {**params, "suite": suite}, params["outdir"])
    workers = max(1, int(os.environ.get("IDENTIKIT_THREADS", "1")))
    trials = list(range(params["trials"]))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: _bench_trial(suite, params, t), trials))
    else:
        rows = [_bench_trial(suite, params, t) for t in trials]

    cols = list(rows[0].keys())
    with open(run.path("trials.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in cols) + "\n")

    numeric = [c for c in cols if all(isinstance(r[c], (int, float)) for r in rows)]
    summary_lines = ["metric,median,iqr"]
    print(f"bench {suite}: {len(rows)} trials")
    for c in numeric:
        vals = np.array([float(r[c]) for r in rows])
        med = float(np.median(vals))
        iqr = float(np.percentile(vals, 75) - np.percentile(vals, 25))
        summary_lines.append(f"{c},{med:.12g},{iqr:.12g}")
        print(f"  {c}: median {med:.6g}, IQR {iqr:.6g}")
    with open(run.path("summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(summary_lines) + "\n")
    run.finish()
    return 0


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="identikit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"identikit {__version__}")
    parser.add_argument("--from-manifest", help="re-run the command recorded in a manifest JSON")
    sub = parser.add_subparsers(dest="command")

    def add(name, func, positional=None, choices=None):
        p = sub.add_parser(name, argument_default=_MISSING)
        p.add_argument("--config", default=None, help="key = value config file")
        if positional == "data":
            p.add_argument("data", help="input dataset CSV")
        elif positional == "which":
            p.add_argument("which", choices=choices)
        elif positional == "suite":
            p.add_argument("suite")
        p.set_defaults(func=func)
        return p

    p = add("generate", _cmd_generate)
    p.add_argument("--model", choices=(
        "linear-ica", "demo-signals", "lingam", "nica", "nonsens", "anm", "pnl", "carefl"
    ))
    p.add_argument("--vars", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dist", help="gaussian | laplace | uniform | gg:BETA")
    p.add_argument("--edge-prob", type=float, dest="edge_prob")
    p.add_argument("--segments", type=int)
    p.add_argument("--per-segment", type=int, dest="per_segment")
    p.add_argument("--mix-layers", type=int, dest="mix_layers")
    p.add_argument("--identity-mixing", action="store_true", dest="identity_mixing")
    p.add_argument("--lam-min", type=float, dest="lam_min")
    p.add_argument("--lam-max", type=float, dest="lam_max")
    p.add_argument("--noise-scale", type=float, dest="noise_scale")
    p.add_argument("--alpha-zero", action="store_true", dest="alpha_zero")
    p.add_argument("--identity-post", action="store_true", dest="identity_post")
    p.add_argument("--zero-mechanism", action="store_true", dest="zero_mechanism")
    p.add_argument("-o", "--outdir")

    p = add("ica", _cmd_ica, positional="data")
    p.add_argument("--contrast", choices=("logcosh", "kurtosis"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")

    p = add("lingam", _cmd_lingam, positional="data")
    p.add_argument("--prune-threshold", type=float, dest="prune_threshold")
    p.add_argument("--contrast", choices=("logcosh", "kurtosis"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")

    p = add("nica", _cmd_nica, positional="data")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", help="comma-separated hidden widths")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")

    p = add("discover", _cmd_discover, positional="data")
    p.add_argument("--method", choices=("nonsens", "anm", "carefl"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--permutations", type=int)
    p.add_argument("--bandwidth-policy", type=float, dest="bandwidth_policy")
    p.add_argument("--split-ratio", type=float, dest="split_ratio")
    p.add_argument("--margin", type=float)
    p.add_argument("--base", choices=("laplace", "gaussian"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")

    p = add("indep", _cmd_indep, positional="data")
    p.add_argument("--col-x", type=int, dest="col_x")
    p.add_argument("--col-y", type=int, dest="col_y")
    p.add_argument("--permutations", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--outdir")

    p = add("demo", _cmd_demo, positional="which",
            choices=("rotation", "evd", "isometry", "darmois", "symmetry"))
    p.add_argument("--vars", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--dist")
    p.add_argument("--angle", type=float)
    p.add_argument("--map", choices=("orthogonal", "scaled", "tanh"))
    p.add_argument("--rho", type=float)
    p.add_argument("--disturbance", choices=("gaussian", "laplace"))
    p.add_argument("--emit-plot-data", action="store_true", dest="emit_plot_data")
    p.add_argument("-o", "--outdir")

    p = add("bench", _cmd_bench, positional="suite")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--vars", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--segments", type=int)
    p.add_argument("--per-segment", type=int, dest="per_segment")
    p.add_argument("--epochs", type=int)
    p.add_argument("--emit-plot-data", action="store_true", dest="emit_plot_data")
    p.add_argument("-o", "--outdir")

    return parser


def _argv_from_manifest(path: str) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    argv = [doc["subcommand"]]
    params = doc["parameters"]
    sub = doc["subcommand"]
    if sub in ("ica", "lingam", "nica", "discover", "indep"):
        argv.append(doc["inputs"][0])
    elif sub == "demo":
        argv.append(params["which"])
    elif sub == "bench":
        argv.append(params["suite"])
    skip = {"which", "suite", "data"}
    for key, value in params.items():
        if key in skip or value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    outdir = Path(path).parent
    argv.extend(["-o", str(outdir)])
    return argv


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "from_manifest", None):
        try:
            replay = _argv_from_manifest(args.from_manifest)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"identikit: cannot read manifest {args.from_manifest}: {exc}", file=sys.stderr)
            return 1
        args = parser.parse_args(replay)
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except IdentikitError as exc:
        print(f"identikit: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"identikit: cannot read or write: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
