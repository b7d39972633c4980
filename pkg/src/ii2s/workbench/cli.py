"""Command-line workbench: fit, invert, edit, evaluate and plot.

Every command writes its artifacts plus a ``run_manifest.json`` into its
output directory. ``replay --manifest DIR`` reruns a command from that record.

Exit codes: 0 success, 2 usage or invalid input, 3 missing or incompatible
artifacts, 4 diverged optimization.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..conditions import ConditionFn
from ..editing import DEFAULT_SPLIT, EDIT_MULTIPLES, EditDirection, lerp, pca_edit, style_mix, style_transfer
from ..errors import DivergedError, IncompatibleArtifactError, InvalidInputError, InvalidModelError, StaleCodeError
from ..generator import GeneratorHandle, synthesize
from ..inversion import InversionConfig, invert_batch
from ..latent_spaces import (
    PnPlusCode,
    WPlusCode,
    leaky_w_to_p,
    load_codes,
    pnplus_to_wplus,
    save_codes,
    wplus_to_pnplus,
)
from ..metrics import evaluate
from ..perceptual import make_extractor
from ..stats import (
    dip_test,
    fit_whitening_chunks,
    henze_zirkler,
    histogram_dimension,
    iter_w_chunks,
    mardia,
    mardia_combined,
    marginal_normality_scan,
    principal_axes,
    sample_w_array,
)
from ..stats.whitening import WhiteningModel
from .io import CorpusIndex, cache_dir, load_image, load_model_for, open_generator, save_image
from .manifest import RunManifest

log = logging.getLogger("ii2s")

EXIT_OK, EXIT_USAGE, EXIT_ARTIFACT, EXIT_DIVERGED = 0, 2, 3, 4
DEFAULT_T = (0.1, 0.25, 0.5, 0.75, 0.9)
SPACES = {"pnplus": "pn_plus", "wplus": "w_plus", "w": "w", "zplus": "z_plus"}
MODEL_FILE = "whitening.npz"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _fit_model(g: GeneratorHandle, n: int, seed: int, ridge=None) -> WhiteningModel:
    chunks = (leaky_w_to_p(w) for w in iter_w_chunks(g, n, seed))
    return fit_whitening_chunks(chunks, ridge=ridge, generator_fingerprint=g.fingerprint)


def _resolve_model(args, g: GeneratorHandle, manifest: RunManifest) -> WhiteningModel:
    if args.model:
        manifest.add_input(args.model)
        return load_model_for(args.model, g)
    path = cache_dir() / f"whitening_{g.fingerprint}_n{args.fit_samples}_s0.npz"
    if path.exists():
        log.info("using cached whitening model %s", path)
        return load_model_for(path, g)
    log.info("no --model given; fitting %d samples (cached at %s)", args.fit_samples, path)
    m = _fit_model(g, args.fit_samples, 0)
    m.save(path)
    return m


def _load_latents(path, manifest: RunManifest, g: GeneratorHandle | None = None):
    manifest.add_input(path)
    codes, meta = load_codes(path)
    gid = meta.get("generator_id", "")
    if g is not None and gid and gid != g.fingerprint:
        raise IncompatibleArtifactError(
            f"{path} was produced with generator {gid}, but the selected generator is {g.fingerprint}"
        )
    return codes, meta


def _as_wplus(code, m: WhiteningModel | None) -> WPlusCode:
    if isinstance(code, WPlusCode):
        return code
    if isinstance(code, PnPlusCode):
        if m is None:
            raise UsageError("P_N+ latents need --model to map back to W+")
        return pnplus_to_wplus(code, m)
    raise InvalidInputError(f"expected W+ or P_N+ latents, got {type(code).__name__}")


def _render(g: GeneratorHandle, code: WPlusCode) -> np.ndarray:
    return (synthesize(g, code) + 1.0) / 2.0


# --- commands ----------------------------------------------------------------


def cmd_fit(args, manifest: RunManifest) -> dict:
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    manifest.seeds["sampling"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = _fit_model(g, args.n, args.seed, args.ridge)
    m.save(manifest.add_output(out / MODEL_FILE))

    # Distribution tests on a fresh subsample; the full fit is too large for them.
    k = min(args.test_samples, args.n)
    w = sample_w_array(g, k, args.seed + 1)
    tests = {}
    for name, x in (("W", w), ("P", leaky_w_to_p(w))):
        hz = henze_zirkler(x, alpha=args.alpha, ridge=1e-12)
        skew, kurt = mardia(x, alpha=args.alpha, ridge=1e-12)
        top_axis = principal_axes(x)[:, 0]
        dip = dip_test(top_axis, n_boot=args.dip_boot, alpha=args.alpha, seed=args.seed)
        normal_axes, _ = marginal_normality_scan(x, alpha=args.alpha)
        tests[name] = {
            "henze_zirkler": hz.to_dict(),
            "mardia_skew": skew.to_dict(),
            "mardia_kurtosis": kurt.to_dict(),
            "mardia": mardia_combined((skew, kurt)).to_dict(),
            "dip_top_axis": dip.to_dict(),
            "marginal_scan": {"normal_axes": normal_axes, "axes": x.shape[1]},
        }
    summary = {
        "model": str(out / MODEL_FILE),
        "fingerprint": m.fingerprint,
        "generator_fingerprint": g.fingerprint,
        "samples": args.n,
        "ridge": m.ridge,
        "top_singular_values": m.singular_values[: min(10, m.dim)].tolist(),
        "test_samples": k,
        "tests": tests,
    }
    p = manifest.add_output(out / "summary.json")
    p.write_text(json.dumps(summary, indent=2))
    print(f"whitening model {m.fingerprint} from {args.n} samples -> {out / MODEL_FILE}")
    print("top singular values: " + ", ".join(f"{s:.4g}" for s in summary["top_singular_values"]))
    for name, t in tests.items():
        print(
            f"[{name}] HZ p={t['henze_zirkler']['p_value']:.3g}  Mardia p={t['mardia']['p_value']:.3g}  "
            f"dip p={t['dip_top_axis']['p_value']:.3g}  "
            f"marginally normal axes: {t['marginal_scan']['normal_axes']}/{t['marginal_scan']['axes']}"
        )
    return summary


def _inversion_config(args, condition: ConditionFn) -> InversionConfig:
    return InversionConfig(
        lam=args.lam,
        steps=args.steps,
        learning_rate=args.lr,
        parameterization=SPACES[args.space],
        init=args.init,
        seed=args.seed,
        condition=condition,
        trace_every=args.trace_every,
        loss_resolution=args.loss_resolution,
        extractor=args.extractor,
        extractor_seed=args.extractor_seed,
    )


def _run_inversion(args, manifest: RunManifest, condition: ConditionFn) -> dict:
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    manifest.seeds.update(init=args.seed, extractor=args.extractor_seed)
    m = _resolve_model(args, g, manifest)
    if args.image_dir:
        corpus = CorpusIndex.from_dir(args.image_dir)
    elif args.image:
        corpus = CorpusIndex.from_paths(args.image)
    else:
        raise UsageError("give --image or --image-dir")
    for e in corpus.entries:
        manifest.add_input(e.path)
    cfg = _inversion_config(args, condition)
    results = invert_batch(corpus.load(), g, m, cfg, jobs=args.jobs, batch_size=args.batch_size)

    out = Path(args.out)
    save_codes(manifest.add_output(out / "latents_wplus.npz"), [r.w_plus for r in results], g.fingerprint,
               {"ids": corpus.ids})
    save_codes(manifest.add_output(out / "latents_pnplus.npz"), [r.v for r in results], g.fingerprint,
               {"ids": corpus.ids})
    for image_id, r in zip(corpus.ids, results):
        save_image(manifest.add_output(out / "recon" / f"{image_id}.png"), r.image)
        if condition.kind != "identity":
            save_image(manifest.add_output(out / "conditioned" / f"{image_id}.png"), condition(r.image))
    summary = {
        "model_fingerprint": m.fingerprint,
        "config": cfg.to_dict(),
        "images": {
            image_id: {"final": r.final_losses, "trace": [asdict(e) for e in r.trace]}
            for image_id, r in zip(corpus.ids, results)
        },
    }
    p = manifest.add_output(out / "inversion.json")
    p.write_text(json.dumps(summary, indent=2))
    with manifest.add_output(out / "trace.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "step", "total", "perceptual", "pixel", "regularizer", "v_norm_sq"])
        for image_id, r in zip(corpus.ids, results):
            for e in r.trace:
                writer.writerow([image_id, e.step, e.total, e.perceptual, e.pixel, e.regularizer, e.v_norm_sq])
    for image_id, r in zip(corpus.ids, results):
        f = r.final_losses
        print(f"{image_id}: total={f['total']:.5g} pixel={f['pixel']:.5g} ‖v‖²={f['v_norm_sq']:.4g} "
              f"({r.wall_time:.1f}s)")
    return summary


def cmd_invert(args, manifest):
    return _run_inversion(args, manifest, ConditionFn.parse(getattr(args, "condition", None)))


def cmd_conditional(args, manifest):
    return _run_inversion(args, manifest, ConditionFn.parse(args.condition))


def _optional_model(args, g, manifest):
    if not getattr(args, "model", None):
        return None
    manifest.add_input(args.model)
    return load_model_for(args.model, g)


def cmd_edit(args, manifest):
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    codes, _ = _load_latents(args.latent, manifest, g)
    m = _optional_model(args, g, manifest)
    if args.direction_file:
        manifest.add_input(args.direction_file)
        d = EditDirection.from_vector(np.load(args.direction_file), sigma=args.sigma)
    else:
        if m is None:
            raise UsageError("--direction needs --model to read principal directions from")
        d = EditDirection.from_model(m, args.direction)
    out = Path(args.out)
    edited, rows = [], []
    for i, code in enumerate(codes):
        base = _as_wplus(code, m)
        for mult in args.multiple:
            e = pca_edit(base, d, mult)
            edited.append(e)
            rows.append({"code": i, "multiple": mult})
            save_image(manifest.add_output(out / "images" / f"{i:03d}_{mult:+g}.png"), _render(g, e))
    save_codes(manifest.add_output(out / "edits.npz"), edited, g.fingerprint,
               {"edits": rows, "direction_index": d.index, "sigma": d.sigma})
    print(f"{len(edited)} edited codes along direction {d.index} (σ={d.sigma:.4g}) -> {out}")
    return {"count": len(edited)}


def _pick(codes, index: int, name: str):
    if not 0 <= index < len(codes):
        raise UsageError(f"{name} index {index} out of range for {len(codes)} codes")
    return codes[index]


def cmd_interp(args, manifest):
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    m = _optional_model(args, g, manifest)
    a = _pick(_load_latents(args.a, manifest, g)[0], args.index_a, "--index-a")
    b = _pick(_load_latents(args.b, manifest, g)[0], args.index_b, "--index-b")
    if args.space == "pnplus":
        if m is None:
            raise UsageError("--space pnplus needs --model")
        a = a if isinstance(a, PnPlusCode) else wplus_to_pnplus(_as_wplus(a, m), m)
        b = b if isinstance(b, PnPlusCode) else wplus_to_pnplus(_as_wplus(b, m), m)
    else:
        a, b = _as_wplus(a, m), _as_wplus(b, m)
    out = Path(args.out)
    frames = []
    for t in args.t:
        c = lerp(a, b, t)
        w = c if isinstance(c, WPlusCode) else pnplus_to_wplus(c, m)
        frames.append(w)
        save_image(manifest.add_output(out / "images" / f"t{t:g}.png"), _render(g, w))
    save_codes(manifest.add_output(out / "interp.npz"), frames, g.fingerprint, {"t": list(args.t), "interp_space": args.space})
    print(f"interpolated at t = {', '.join(f'{t:g}' for t in args.t)} in {args.space} -> {out}")
    return {"t": list(args.t)}


def cmd_mix(args, manifest):
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    m = _optional_model(args, g, manifest)
    a = _as_wplus(_pick(_load_latents(args.a, manifest, g)[0], args.index_a, "--index-a"), m)
    b = _as_wplus(_pick(_load_latents(args.b, manifest, g)[0], args.index_b, "--index-b"), m)
    mixed = style_mix(a, b, args.split)
    out = Path(args.out)
    save_codes(manifest.add_output(out / "mix.npz"), [mixed], g.fingerprint, {"split": args.split})
    save_image(manifest.add_output(out / "mix.png"), _render(g, mixed))
    print(f"layers 1-{args.split} from A, {args.split + 1}-{a.num_layers} from B -> {out}")
    return {"split": args.split}


def cmd_transfer(args, manifest):
    source = open_generator(args.generator, args.noise)
    target = open_generator(args.target_checkpoint, args.noise)
    manifest.generator_fingerprint = source.fingerprint
    manifest.add_input(args.target_checkpoint)
    m = _optional_model(args, source, manifest)
    codes, _ = _load_latents(args.latent, manifest, source)
    out = Path(args.out)
    for i, code in enumerate(codes):
        img = (style_transfer(_as_wplus(code, m), target) + 1.0) / 2.0
        save_image(manifest.add_output(out / "images" / f"{i:03d}.png"), img)
    print(f"rendered {len(codes)} codes with target generator {target.fingerprint} -> {out}")
    return {"count": len(codes)}


def _match_pairs(ref_dir, gen_dir):
    refs = CorpusIndex.from_dir(ref_dir)
    gens = {e.id: e for e in CorpusIndex.from_dir(gen_dir).entries}
    pairs = [(e, gens[e.id]) for e in refs.entries if e.id in gens]
    if not pairs:
        raise UsageError(f"no file names in {gen_dir} match those in {ref_dir}")
    missing = [e.id for e in refs.entries if e.id not in gens]
    if missing:
        log.warning("%d reference images have no reconstruction: %s", len(missing), ", ".join(missing[:5]))
    return pairs


def cmd_metrics(args, manifest):
    pairs = _match_pairs(args.ref_dir, args.gen_dir)
    refs, gens = [], []
    for r, gen in pairs:
        manifest.add_input(r.path)
        manifest.add_input(gen.path)
        a, b = load_image(r.path), load_image(gen.path)
        if a.shape != b.shape:
            raise InvalidInputError(f"{r.id}: reference {a.shape} and reconstruction {b.shape} differ in size")
        refs.append(a)
        gens.append(b)

    def ext(name):
        return make_extractor(name, seed=args.extractor_seed) if name else None

    report = evaluate(np.stack(refs), np.stack(gens), [r.id for r, _ in pairs],
                      vgg=ext(args.vgg), lpips=ext(args.lpips), fid_extractor=ext(args.fid_extractor))
    out = Path(args.out)
    report.write_json(manifest.add_output(out))
    if args.csv:
        report.write_csv(manifest.add_output(args.csv))
    agg = report.aggregates()
    print("  ".join(f"{k}={v:.4g}" for k, v in agg.items()))
    return report.to_dict()


def cmd_hist(args, manifest):
    codes = []
    for path in args.latent:
        codes.extend(_load_latents(path, manifest)[0])
    try:
        h = histogram_dimension(codes, k=args.dimension, bins=args.bins,
                                value_range=tuple(args.range) if args.range else None)
    except IndexError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (manifest.add_output(out / "hist.json")).write_text(json.dumps(h.to_dict(), indent=2))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2), dpi=100)
    ax.stairs(h.counts, h.bin_edges, fill=True)
    ax.set_xlabel(f"dimension {h.dimension_index} ({h.space_tag})")
    ax.set_ylabel("count")
    ax.set_title(f"{h.total} values pooled over layers")
    fig.tight_layout()
    fig.savefig(manifest.add_output(out / "hist.png"), metadata={"Software": None})
    plt.close(fig)
    print(f"histogram of dimension {h.dimension_index}: {h.total} values -> {out}")
    return h.to_dict()


def cmd_generate(args, manifest):
    g = open_generator(args.generator, args.noise)
    manifest.generator_fingerprint = g.fingerprint
    manifest.seeds["planted"] = args.seed
    rows = 1 if args.mode == "w" else g.num_layers
    w = sample_w_array(g, rows, args.seed)
    code = WPlusCode(np.repeat(w, g.num_layers, axis=0) if args.mode == "w" else w)
    out = Path(args.out)
    save_codes(manifest.add_output(out / "planted.npz"), [code], g.fingerprint, {"seed": args.seed})
    save_image(manifest.add_output(out / "planted.png"), _render(g, code))
    print(f"planted {args.mode} image with seed {args.seed} -> {out / 'planted.png'}")
    return {"seed": args.seed}


def cmd_replay(args, manifest):
    recorded = RunManifest.read(args.manifest)
    changed = recorded.changed_inputs()
    if changed:
        raise IncompatibleArtifactError("inputs changed since the recorded run: " + ", ".join(changed))
    snapshot = dict(recorded.config)
    if args.out:
        snapshot["out"] = args.out
    ns = argparse.Namespace(**snapshot)
    return run(recorded.command, ns)


COMMANDS = {
    "fit": cmd_fit,
    "invert": cmd_invert,
    "conditional": cmd_conditional,
    "edit": cmd_edit,
    "interp": cmd_interp,
    "mix": cmd_mix,
    "transfer": cmd_transfer,
    "metrics": cmd_metrics,
    "hist": cmd_hist,
    "generate": cmd_generate,
}


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of defaults; command-line flags take precedence")
    common.add_argument("-v", "--verbose", action="store_true")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--generator", default="toy", help="toy, toy:<seed>, a toy config .json or a checkpoint")
    gen.add_argument("--noise", default="zeros", help="zeros or random:<seed>")

    parser = argparse.ArgumentParser(prog="ii2s", description=__doc__.split("\n")[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common, gen], help="fit the whitening model")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--test-samples", type=int, default=1000)
    p.add_argument("--dip-boot", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)

    inv = argparse.ArgumentParser(add_help=False)
    inv.add_argument("--image", nargs="+")
    inv.add_argument("--image-dir")
    inv.add_argument("--model", help="whitening model from `fit`; fitted and cached when omitted")
    inv.add_argument("--fit-samples", type=int, default=100_000)
    inv.add_argument("--lambda", dest="lam", type=float, default=0.005)
    inv.add_argument("--steps", type=int, default=1300)
    inv.add_argument("--lr", type=float, default=0.01)
    inv.add_argument("--space", choices=sorted(SPACES), default="pnplus")
    inv.add_argument("--init", choices=("center", "random"), default="center")
    inv.add_argument("--seed", type=int, default=0)
    inv.add_argument("--trace-every", type=int, default=10)
    inv.add_argument("--loss-resolution", type=int, default=256)
    inv.add_argument("--extractor", default="random_conv")
    inv.add_argument("--extractor-seed", type=int, default=0)
    inv.add_argument("--jobs", type=int, default=1)
    inv.add_argument("--batch-size", type=int, default=16)
    inv.add_argument("--out", required=True)

    p = sub.add_parser("invert", parents=[common, gen, inv], help="embed images")
    p.add_argument("--condition", default="none", help="none, gray, mask:right-half, mask:t,l,b,r or sr:<size>")
    p = sub.add_parser("conditional", parents=[common, gen, inv], help="embed degraded observations")
    p.add_argument("--condition", required=True, help="gray, mask:right-half, mask:t,l,b,r or sr:<size>")

    p = sub.add_parser("edit", parents=[common, gen], help="move latents along a principal direction")
    p.add_argument("--latent", required=True)
    p.add_argument("--model")
    p.add_argument("--direction", type=int, default=0)
    p.add_argument("--direction-file", help=".npy vector used instead of a principal direction")
    p.add_argument("--sigma", type=float, default=1.0, help="step scale for --direction-file")
    p.add_argument("--multiple", type=_floats, default=list(EDIT_MULTIPLES))
    p.add_argument("--out", required=True)

    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--a", required=True)
    pair.add_argument("--b", required=True)
    pair.add_argument("--index-a", type=int, default=0)
    pair.add_argument("--index-b", type=int, default=0)
    pair.add_argument("--model")
    pair.add_argument("--out", required=True)

    p = sub.add_parser("interp", parents=[common, gen, pair], help="interpolate two latents")
    p.add_argument("--t", type=_floats, default=list(DEFAULT_T))
    p.add_argument("--space", choices=("wplus", "pnplus"), default="wplus")
    p = sub.add_parser("mix", parents=[common, gen, pair], help="style-mix two latents")
    p.add_argument("--split", type=int, default=DEFAULT_SPLIT)

    p = sub.add_parser("transfer", parents=[common, gen], help="render latents with another generator")
    p.add_argument("--latent", required=True)
    p.add_argument("--target-checkpoint", required=True)
    p.add_argument("--model")
    p.add_argument("--out", required=True)

    p = sub.add_parser("metrics", parents=[common], help="reconstruction metrics over paired images")
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--gen-dir", required=True)
    p.add_argument("--out", default="report.json")
    p.add_argument("--csv")
    p.add_argument("--vgg", help="extractor for the VGG column, e.g. random_conv_vgg")
    p.add_argument("--lpips", help="extractor for the LPIPS column, e.g. lpips:vgg or random_conv")
    p.add_argument("--fid-extractor")
    p.add_argument("--extractor-seed", type=int, default=0)

    p = sub.add_parser("hist", parents=[common], help="histogram one latent dimension pooled over layers")
    p.add_argument("--latent", nargs="+", required=True)
    p.add_argument("--dimension", type=int, default=20)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--range", type=float, nargs=2)
    p.add_argument("--out", required=True)

    p = sub.add_parser("generate", parents=[common, gen], help="synthesize a planted test image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("w", "wplus"), default="w")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", parents=[common], help="rerun a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    raw = json.loads(path.read_text())
    subparsers = parser._subparsers._group_actions[0].choices

    def dests(name):
        return {a.dest for a in subparsers[name]._actions}

    def normalize(d):
        d = {k.replace("-", "_"): v for k, v in d.items()}
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return d

    shared = normalize({k: v for k, v in raw.items() if not isinstance(v, dict)})
    section = normalize(raw.get(args.command, {}))
    known = dests(args.command)
    everywhere = set().union(*(dests(name) for name in subparsers))
    unknown = sorted((set(shared) - everywhere) | (set(section) - known))
    if unknown:
        raise UsageError(f"unknown keys in {path} for `{args.command}`: {', '.join(unknown)}")
    # Top-level keys reach every command that has the option.
    values = {k: v for k, v in shared.items() if k in known}
    values.update(section)
    subparser = subparsers[args.command]
    # Parsing again with config values as defaults lets explicit flags win.
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def _snapshot(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "func")}


def run(command: str, args: argparse.Namespace):
    if command == "replay":
        return cmd_replay(args, None)
    manifest = RunManifest(command=command, config=_snapshot(args))
    result = COMMANDS[command](args, manifest)
    out = Path(args.out)
    manifest.write(out.parent if command == "metrics" else out)
    return result


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run(args.command, args)
    except DivergedError as exc:
        print(f"error: optimization diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (IncompatibleArtifactError, StaleCodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except InvalidModelError as exc:
        print(f"error: {exc} (pass --ridge or draw more samples)", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
