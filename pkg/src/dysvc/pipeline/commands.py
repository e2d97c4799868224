"""End-to-end commands: train, transform, evaluate and augment."""
from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import evaluation as ev
from ..dcgan import io as gio
from ..dcgan.model import DcganModel
from ..dcgan.train import train_gan, transform_features
from ..errors import ArtifactMissing, EmptyTrainingSet, SchemaMismatch, TooFewVoicedFrames
from ..features import (
    CORR_SCHEMA,
    SCHEMA_VERSION,
    FeatureSequence,
    ap_to_bap,
    assemble_eval_vector,
    bap_to_ap,
    mcep_to_sp,
    sp_to_mcep,
)
from ..pitch_mod import alpha_from_reference, group_by_speaker, pitch_stats, reference_std, speaker_std, transform_f0
from ..rate_mod import detect_epochs, psola_stretch
from ..signal_core import CANONICAL_RATE, Waveform, load_wav, resample, save_wav
from ..vocoder import VocoderFrames, analyze, estimate_f0, synthesize
from .config import PipelineConfig
from .manifest import CorpusManifest, ManifestEntry, validate_manifest
from .pairs import build_pairs

log = logging.getLogger(__name__)

ARTIFACT_FILES = ("config.toml", "mcep.dgan", "bap.dgan", "pitch_stats.json", "norm_stats.json",
                  "train_log_mcep.csv", "train_log_bap.csv")
INDEX_FILE = "artifacts.json"
ARTIFACT_SCHEMA = "dysvc-artifacts-v1"


# ---------------------------------------------------------------------------
# per-utterance helpers (top level so worker processes can pickle them)


def read_audio(path) -> Waveform:
    w = load_wav(path)
    return w if w.sample_rate == CANONICAL_RATE else resample(w, CANONICAL_RATE)


def _vocoder_kw(cfg: PipelineConfig) -> dict:
    v = cfg.vocoder
    return dict(f0_floor=v.f0_floor, f0_ceil=v.f0_ceil, frame_shift=v.frame_shift, fft_size=v.fft_size)


def extract(w: Waveform, cfg: PipelineConfig, source_id: str = "") -> Tuple[VocoderFrames, FeatureSequence, FeatureSequence]:
    vf = analyze(w, **_vocoder_kw(cfg))
    mc = sp_to_mcep(vf.sp, warp=cfg.vocoder.warp, frame_shift=vf.frame_shift, source_id=source_id)
    bap = ap_to_bap(vf.ap, vf.sample_rate, vf.frame_shift, source_id)
    return vf, mc, bap


def stretch_to(w: Waveform, n_samples: int, cfg: PipelineConfig) -> Waveform:
    f0 = estimate_f0(w, cfg.vocoder.f0_floor, cfg.vocoder.f0_ceil, cfg.vocoder.frame_shift)
    epochs = detect_epochs(w, f0, cfg.vocoder.frame_shift)
    return psola_stretch(w, epochs, n_samples / len(w))


def _target_job(args):
    path, cfg = args
    w = read_audio(path)
    vf, mc, bap = extract(w, cfg, str(path))
    return vf.f0, mc.data, bap.data, vf.n_frames, len(w)


def _source_job(args):
    path, n_samples, cfg = args
    w = stretch_to(read_audio(path), n_samples, cfg)
    _, mc, bap = extract(w, cfg, str(path))
    return mc.data, bap.data


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------------------
# artifacts


@dataclass
class Artifacts:
    mcep: DcganModel
    bap: DcganModel
    alpha_reference_std: float
    index: dict
    path: Path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _vocoder_signature(cfg: PipelineConfig) -> dict:
    return asdict(cfg.vocoder)


def load_artifacts(artifact_dir, cfg: Optional[PipelineConfig] = None) -> Artifacts:
    d = Path(artifact_dir)
    if not d.is_dir():
        raise ArtifactMissing(f"artifact directory {d} not found")
    if not (d / INDEX_FILE).is_file():
        raise ArtifactMissing(f"{INDEX_FILE} missing in {d} (incomplete training run?)")
    for name in ARTIFACT_FILES:
        if not (d / name).is_file():
            raise ArtifactMissing(f"{name} missing in {d}")
    index = json.loads((d / INDEX_FILE).read_text())
    if index.get("schema") != ARTIFACT_SCHEMA:
        raise SchemaMismatch(f"artifact schema {index.get('schema')!r}, expected {ARTIFACT_SCHEMA}")
    if cfg is not None and index.get("vocoder") != _vocoder_signature(cfg):
        raise SchemaMismatch("artifacts were trained with different vocoder settings")
    mcep = gio.load_model(d / "mcep.dgan")
    bap = gio.load_model(d / "bap.dgan")
    if mcep.kind != "mcep" or bap.kind != "bap":
        raise SchemaMismatch("model files hold the wrong feature kinds")
    stats = json.loads((d / "pitch_stats.json").read_text())
    return Artifacts(mcep, bap, float(stats["alpha_reference_std"]), index, d)


def _commit_dir(tmp: Path, out: Path) -> None:
    if out.exists():
        old = out.with_name(out.name + ".old")
        if old.exists():
            shutil.rmtree(old)
        os.replace(out, old)
        os.replace(tmp, out)
        shutil.rmtree(old)
    else:
        os.replace(tmp, out)


def cmd_train(manifest, cfg: PipelineConfig, out_dir) -> Path:
    """Train both GANs and the pitch reference; write the artifact directory atomically."""
    m = manifest if isinstance(manifest, CorpusManifest) else validate_manifest(manifest)
    plan = build_pairs(m, cfg)
    if not plan.pairs:
        raise EmptyTrainingSet("no training pairs: check the train phrase split")
    out = Path(out_dir)

    targets = sorted({p.target for p in plan.pairs}, key=lambda e: (e.speaker_id, e.phrase_id))
    log.info("analysing %d target utterances", len(targets))
    t_res = _pmap(_target_job, [(e.path, cfg) for e in targets], cfg.jobs)
    t_feat = {e: r for e, r in zip(targets, t_res)}
    t_len = {e: r[4] for e, r in t_feat.items()}

    log.info("stretching and analysing %d pair sources", len(plan.pairs))
    s_res = _pmap(_source_job, [(p.source.path, t_len[p.target], cfg) for p in plan.pairs], cfg.jobs)

    mcep_pairs, bap_pairs = [], []
    for p, (s_mc, s_bap) in zip(plan.pairs, s_res):
        _, t_mc, t_bap, t_frames, _ = t_feat[p.target]
        t = min(s_mc.shape[1], t_frames)
        mcep_pairs.append((FeatureSequence(s_mc[:, :t], "mcep"), FeatureSequence(t_mc[:, :t], "mcep")))
        bap_pairs.append((FeatureSequence(s_bap[:, :t], "bap"), FeatureSequence(t_bap[:, :t], "bap")))

    # monopitch reference: mean over ALS speakers of their mean utterance std
    per_utt = []
    for e in targets:
        try:
            per_utt.append((e.speaker_id, pitch_stats(t_feat[e][0])))
        except TooFewVoicedFrames:
            log.warning("skipping %s for pitch statistics: too few voiced frames", e.path)
    per_speaker = group_by_speaker(per_utt)
    ref = reference_std(per_speaker)

    log.info("training mcep GAN on %d pairs", len(mcep_pairs))
    mc_model, mc_log = train_gan(mcep_pairs, cfg.dcgan, seed=cfg.seed)
    log.info("training bap GAN on %d pairs", len(bap_pairs))
    bap_model, bap_log = train_gan(bap_pairs, cfg.dcgan, seed=cfg.seed + 1)

    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        (tmp / "config.toml").write_text(cfg.to_toml())
        gio.save_model(mc_model, tmp / "mcep.dgan")
        gio.save_model(bap_model, tmp / "bap.dgan")
        gio.write_loss_log(mc_log, tmp / "train_log_mcep.csv")
        gio.write_loss_log(bap_log, tmp / "train_log_bap.csv")
        _write_json(tmp / "pitch_stats.json", {
            "alpha_reference_std": ref,
            "per_speaker_stds": {k: speaker_std(v) for k, v in sorted(per_speaker.items())},
            "n_utterances": len(per_utt),
        })
        _write_json(tmp / "norm_stats.json", {
            kind: {k: v.tolist() for k, v in sorted(model.norm.items())}
            for kind, model in (("mcep", mc_model), ("bap", bap_model))
        })
        _write_json(tmp / INDEX_FILE, {
            "schema": ARTIFACT_SCHEMA,
            "files": list(ARTIFACT_FILES),
            "seed": cfg.seed,
            "n_pairs": len(plan.pairs),
            "train_phrases": list(plan.train_phrases),
            "vocoder": _vocoder_signature(cfg),
        })
        _commit_dir(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


# ---------------------------------------------------------------------------
# transform


def transform_waveform(art: Artifacts, w: Waveform, cfg: PipelineConfig) -> Tuple[Waveform, dict]:
    """Stretch, analyse, map MCEP/BAP through the GANs, compress F0 and resynthesise."""
    if w.sample_rate != CANONICAL_RATE:
        w = resample(w, CANONICAL_RATE)
    stretched = stretch_to(w, int(round(cfg.rate_factor * len(w))), cfg)
    vf, mc, bap = extract(stretched, cfg)
    mc_t = transform_features(art.mcep, mc)
    bap_t = transform_features(art.bap, bap)
    src_stats = pitch_stats(vf.f0)
    alpha = alpha_from_reference(art.alpha_reference_std, src_stats)
    f0 = transform_f0(vf.f0, alpha)
    out_vf = VocoderFrames(f0, mcep_to_sp(mc_t, vf.fft_size, cfg.vocoder.warp),
                           bap_to_ap(bap_t, vf.fft_size, vf.sample_rate),
                           vf.frame_shift, vf.fft_size, vf.sample_rate)
    y = synthesize(out_vf, cfg.seed)
    # match the input loudness; the envelope mapping can shift overall gain
    rms_in = np.sqrt(np.mean(w.samples ** 2))
    rms_out = np.sqrt(np.mean(y.samples ** 2))
    if rms_out > 0:
        y = Waveform(y.samples * (rms_in / rms_out), y.sample_rate)
    info = {"alpha": alpha, "input_f0_std": src_stats.std_f0, "stretched_samples": len(stretched)}
    return y, info


def cmd_transform(artifact_dir, input_wav, cfg: PipelineConfig, output_wav) -> Path:
    art = load_artifacts(artifact_dir, cfg)
    y, info = transform_waveform(art, read_audio(input_wav), cfg)
    save_wav(y, output_wav)
    log.info("wrote %s (alpha %.3f)", output_wav, info["alpha"])
    return Path(output_wav)


# ---------------------------------------------------------------------------
# evaluation


def _eval_job(args):
    path_or_w, include_rhythm = args
    w = path_or_w if isinstance(path_or_w, Waveform) else read_audio(path_or_w)
    if include_rhythm and len(w) < w.sample_rate:
        # the modulation spectrum needs 1 s; short phrases get trailing silence
        w = Waveform(np.pad(w.samples, (0, w.sample_rate - len(w))), w.sample_rate)
    return assemble_eval_vector(w, include_rhythm).vector


def _frame_job(args):
    path_or_w, cfg = args
    w = path_or_w if isinstance(path_or_w, Waveform) else read_audio(path_or_w)
    vf, mc, bap = extract(w, cfg)
    voiced = vf.f0 > 0
    return np.vstack([mc.data, bap.data, np.log(np.where(voiced, vf.f0, 1.0))[None, :]])[:, voiced].T


def _transform_job(args):
    art_dir, path, cfg = args
    art = load_artifacts(art_dir, cfg)
    return transform_waveform(art, read_audio(path), cfg)[0]


def cmd_evaluate(artifact_dir, manifest, cfg: PipelineConfig, out_json=None) -> dict:
    """Objective report: Dp on frame-level vocoder features, SVM on utterance vectors."""
    m = manifest if isinstance(manifest, CorpusManifest) else validate_manifest(manifest)
    load_artifacts(artifact_dir, cfg)
    plan = build_pairs(m, cfg)
    train = set(plan.train_phrases)
    healthy_test = plan.test_items
    als_train = sorted((e for e in m.by_group("als") if e.phrase_id in train),
                       key=lambda e: (e.speaker_id, e.phrase_id))
    healthy_train = sorted((e for e in m.by_group("healthy") if e.phrase_id in train),
                           key=lambda e: (e.speaker_id, e.phrase_id))
    if not healthy_test:
        raise EmptyTrainingSet("no healthy test items: check the test phrase split")

    transformed = _pmap(_transform_job, [(str(artifact_dir), e.path, cfg) for e in healthy_test], cfg.jobs)

    def vecs(items):
        return np.array(_pmap(_eval_job, [(x, False) for x in items], cfg.jobs))

    v_ht = vecs([e.path for e in healthy_test])
    v_tt = vecs(transformed)
    v_at = vecs([e.path for e in als_train])
    v_hr = vecs([e.path for e in healthy_train])

    # frame-level Dp features, z-scored with ALS statistics
    fr = lambda items: np.vstack(_pmap(_frame_job, [(x, cfg) for x in items], cfg.jobs))
    f_h, f_t, f_a = fr([e.path for e in healthy_test]), fr(transformed), fr([e.path for e in als_train])
    mu, sd = f_a.mean(axis=0), np.maximum(f_a.std(axis=0), 1e-9)
    dp_sets = {k: (v - mu) / sd for k, v in (("healthy", f_h), ("transformed", f_t), ("als", f_a))}

    report = ev.objective_eval(v_ht, v_tt, v_at, v_hr, n_trials=cfg.evaluation.dp_trials, seed=cfg.seed,
                               dp_sets=dp_sets, dp_rows_cap=cfg.evaluation.dp_max_rows,
                               svm_lambda=cfg.evaluation.svm_lambda,
                               svm_epochs=cfg.evaluation.svm_epochs)
    report["metadata"] = {
        "dp_features": "frame-level mcep+bap+log f0 of voiced frames, z-scored with ALS statistics",
        "dp_rows_per_class": {k: int(len(v)) for k, v in dp_sets.items()},
        "svm_features": f"{SCHEMA_VERSION}/{CORR_SCHEMA} without rhythm",
        "n_items": {"healthy_test": len(healthy_test), "als_train": len(als_train),
                    "healthy_train": len(healthy_train)},
        "artifact_seed": load_artifacts(artifact_dir).index["seed"],
    }
    report["config"] = cfg.to_toml()
    if out_json is not None:
        Path(out_json).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return report


def _labeled(items: Sequence[ManifestEntry], vectors: np.ndarray, label: str, prefix: str = "") -> ev.LabeledSet:
    return ev.LabeledSet(vectors, [label] * len(items), [prefix + e.speaker_id for e in items])


def cmd_augment(manifest, artifact_dir, cfg: PipelineConfig, out_csv=None) -> List[dict]:
    """Accuracy curve for ataxic-vs-ALS as simulated ALS speakers are added.

    Simulated speakers are the transformed recordings of each healthy speaker.
    The baseline adds, for k = 1, 2, ..., a white-noise copy of the k-th ALS
    speaker (cycling) at the configured SNR.
    """
    m = manifest if isinstance(manifest, CorpusManifest) else validate_manifest(manifest)
    load_artifacts(artifact_dir, cfg)
    key = lambda e: (e.speaker_id, e.phrase_id)
    ataxic = sorted(m.by_group("ataxic"), key=key)
    als = sorted(m.by_group("als"), key=key)
    healthy = sorted(m.by_group("healthy"), key=key)
    if not ataxic or not als:
        raise EmptyTrainingSet("augmentation needs ataxic and ALS speakers")

    vecs = lambda items: np.array(_pmap(_eval_job, [(x, True) for x in items], cfg.jobs))
    base = ev.LabeledSet.concat([_labeled(ataxic, vecs([e.path for e in ataxic]), "ataxic"),
                                 _labeled(als, vecs([e.path for e in als]), "als")])

    k_max = cfg.evaluation.k_max
    sim_speakers = sorted({e.speaker_id for e in healthy})
    if k_max < 0:
        k_max = len(sim_speakers)
    sim_speakers = sim_speakers[:k_max]
    pool = []
    for spk in sim_speakers:
        items = [e for e in healthy if e.speaker_id == spk]
        outs = _pmap(_transform_job, [(str(artifact_dir), e.path, cfg) for e in items], cfg.jobs)
        pool.append(_labeled(items, vecs(outs), "als", prefix="sim-"))

    als_speakers = sorted({e.speaker_id for e in als})
    noise_pool = []
    for k in range(k_max):
        spk = als_speakers[k % len(als_speakers)]
        items = [e for e in als if e.speaker_id == spk]
        rng = np.random.default_rng([cfg.seed, 3, k])
        noisy = []
        for e in items:
            w = read_audio(e.path)
            noisy.append(Waveform(ev.add_white_noise(w.samples, cfg.evaluation.noise_snr_db, rng), w.sample_rate))
        noise_pool.append(_labeled(items, vecs(noisy), "als"))

    rows = ev.augmentation_experiment(base, pool, noise_pool, k_max=k_max, seed=cfg.seed,
                                      svm_lambda=cfg.evaluation.svm_lambda,
                                      svm_epochs=cfg.evaluation.svm_epochs)
    if out_csv is not None:
        out_csv = Path(out_csv)
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "accuracy", "baseline_accuracy"])
            for r in rows:
                w.writerow([r["k"], repr(r["accuracy"]), repr(r["baseline_accuracy"])])
        _write_json(out_csv.with_suffix(".meta.json"), {
            "seed": cfg.seed,
            "noise_snr_db": cfg.evaluation.noise_snr_db,
            "accuracy": "utterance-level accuracy per held-out original speaker, averaged over folds",
            "svm": {"kernel": "linear", "reg_lambda": cfg.evaluation.svm_lambda,
                    "epochs": cfg.evaluation.svm_epochs},
            "n_base": {"ataxic": len(ataxic), "als": len(als)},
            "simulated_speakers": ["sim-" + s for s in sim_speakers],
            "config": cfg.to_toml(),
        })
    return rows
