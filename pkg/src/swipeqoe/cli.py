"""Command-line interface wiring the toolkit's file formats together."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path


from . import analysis, design, fitting, models, netsim, raters, service
from .exceptions import SwipeQoeError


def _default_coefficients() -> models.ModelCoefficients:
    path = resources.files("swipeqoe").joinpath("data/default_coefficients.json")
    return models.ModelCoefficients.from_dict(json.loads(path.read_text()))


def _load_coefficients(path: str | None) -> models.ModelCoefficients:
    if path is None:
        return _default_coefficients()
    return models.ModelCoefficients.read(path)


def _dataset_from_files(design_path: str, mos_path: str):
    """Join a design document with a MOS file on stimulus id."""
    doc = design.read_design(design_path)
    sessions = doc.session_by_id()
    dataset = []
    for rec in analysis.read_mos(mos_path):
        if rec.stimulus_id in sessions:
            dataset.append((sessions[rec.stimulus_id], rec.mos))
    if not dataset:
        raise SwipeQoeError("no stimulus ids in the MOS file match the design")
    return dataset


def cmd_generate_stimuli(args) -> int:
    stimuli = design.generate_design()
    design.write_design(args.out, stimuli)
    print(f"wrote {len(stimuli)} stimuli to {args.out}")
    return 0


def cmd_predict(args) -> int:
    doc = design.read_design(args.design)
    coeffs = _load_coefficients(args.coeffs)
    registry = models.load_registry(args.params)
    if args.model == "all":
        model_ids = [models.MODEL_PROPOSED] + list(registry.ids())
    else:
        model_ids = [args.model]
    predictions = []
    for model_id in model_ids:
        if model_id == models.MODEL_PROPOSED:
            for stim in doc.stimuli:
                raw = models.predict_proposed(stim.session, coeffs, clamp=args.clamp)
                predictions.append(models.Prediction(stim.stimulus_id, model_id, raw))
        else:
            model = registry.get(model_id)
            if not model.available:
                if args.model == "all":
                    print(f"skipping unavailable baseline '{model_id}'")
                    continue
                raise SwipeQoeError(
                    f"baseline '{model_id}' is an adapter slot with no external "
                    f"scorer configured")
            for stim in doc.stimuli:
                raw = model.score(models.BaselineInput.from_session(stim.session))
                predictions.append(models.Prediction(stim.stimulus_id, model_id, raw))
    models.write_predictions(args.out, predictions)
    print(f"wrote {len(predictions)} predictions to {args.out}")
    return 0


def cmd_fit(args) -> int:
    dataset = _dataset_from_files(args.design, args.mos)
    config = fitting.FitConfig(lambda_grid=(args.lambda_min, args.lambda_max,
                                            args.lambda_step),
                               refine_tolerance=args.refine_tolerance)
    coeffs = fitting.fit_proposed(dataset, config)
    coeffs.write(args.out)
    print(f"fitted coefficients on {len(dataset)} stimuli -> {args.out}")
    print(json.dumps(coeffs.to_dict(), sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    if args.ratings:
        table = analysis.RatingTable.read(args.ratings)
        screening = analysis.screen_raters(table, threshold=args.screen_threshold)
        table = table.restrict_to(screening.kept)
        records = analysis.compute_mos(table)
        tmp_mos = {r.stimulus_id: r.mos for r in records}
        doc = design.read_design(args.design)
        sessions = doc.session_by_id()
        dataset = [(sessions[sid], m) for sid, m in tmp_mos.items() if sid in sessions]
        if not dataset:
            raise SwipeQoeError("no stimulus ids in the ratings file match the design")
    else:
        dataset = _dataset_from_files(args.design, args.mos)
    registry = models.load_registry(args.params)
    config = fitting.FitConfig(seed=args.seed, train_fraction=args.train,
                               repeats=args.repeats, align_on=args.align_on)
    report = fitting.evaluate_protocol(dataset, registry, config)
    report.write(args.out)
    print(f"evaluated {len(dataset)} stimuli over {args.repeats} splits -> {args.out}")
    for agg in report.aggregates:
        if agg.partition == "test" and agg.rmse is not None:
            print(f"  {agg.model_id:12s} rmse={agg.rmse:.3f} pcc={agg.pcc:.3f} "
                  f"srocc={agg.srocc:.3f}")
    return 0


def cmd_simulate_raters(args) -> int:
    doc = design.read_design(args.design)
    coeffs = _load_coefficients(args.coeffs)
    true_mos = {s.stimulus_id: models.predict_proposed(s.session, coeffs, clamp=True)
                for s in doc.stimuli}
    profiles = raters.make_panel(args.raters, n_random=args.adversarial,
                                 base_seed=args.seed)
    table = raters.simulate_ratings(true_mos, args.sos_a, profiles)
    table.write(args.out)
    print(f"wrote {len(table)} ratings ({len(profiles)} raters x "
          f"{len(true_mos)} stimuli) to {args.out}")
    return 0


def cmd_screen(args) -> int:
    table = analysis.RatingTable.read(args.ratings)
    result = analysis.screen_raters(table, threshold=args.threshold)
    kept_table = table.restrict_to(result.kept)
    kept_table.write(args.out)
    print(f"kept {len(result.kept)} raters, removed {len(result.removed)} "
          f"-> {args.out}")
    if args.report:
        Path(args.report).write_text(json.dumps({
            "kept": sorted(result.kept),
            "removed": result.removed,
            "rounds": result.rounds,
            "threshold": args.threshold,
        }, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_mos(args) -> int:
    table = analysis.RatingTable.read(args.ratings)
    records = analysis.compute_mos(table)
    analysis.write_mos(args.out, records)
    print(f"wrote {len(records)} MOS records to {args.out}")
    return 0


def cmd_sos(args) -> int:
    records = analysis.read_mos(args.mos)
    fit = analysis.fit_sos(records)
    print(json.dumps({"a": fit.a}))
    if args.out:
        Path(args.out).write_text(json.dumps({"a": fit.a}) + "\n")
    return 0


def cmd_simulate_session(args) -> int:
    trace = netsim.BandwidthTrace.read(args.trace)
    if args.videos:
        doc = json.loads(Path(args.videos).read_text())
        videos = tuple(design.Video.from_dict(v) for v in doc["videos"])
    else:
        videos = design.DEFAULT_VIDEOS
    durations = tuple(float(x) for x in args.script.split(","))
    result = netsim.simulate_session(
        videos, trace, netsim.PreloadPolicy(args.queue_depth),
        netsim.SwipeScript(durations))
    out = {
        "format": "swipeqoe-session",
        "version": 1,
        "initial_delay_ms": int(round(float(result.initial_delay_s) * 1000)),
        "trace_extended": result.trace_extended,
        "session": design.session_to_dict(result.session),
        "score": netsim.score_session(result.session, _load_coefficients(args.coeffs)),
    }
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    if args.events:
        netsim.write_event_log(args.events, result.events)
    delays = [float(d) for d in result.session.delays]
    print(f"initial delay {float(result.initial_delay_s):.3f} s, "
          f"swipe delays {delays} -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = service.StudyConfig(
        design_path=args.design, ratings_path=args.ratings,
        host=args.host, port=args.port,
        randomize_order=not args.no_shuffle,
        training_count=args.training,
        subset_index=args.subset_index, subset_count=args.subset_count,
        seed=args.seed, media_dir=args.media_dir)
    service.serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swipeqoe",
                                description="Swipe-delay QoE toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-stimuli", help="emit the full stimulus design")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_stimuli)

    pr = sub.add_parser("predict", help="score stimuli with a model")
    pr.add_argument("--design", required=True)
    pr.add_argument("--coeffs", help="coefficients JSON (packaged default if omitted)")
    pr.add_argument("--params", help="baseline parameter file (packaged default)")
    pr.add_argument("--model", default=models.MODEL_PROPOSED,
                    help="model id, or 'all'")
    pr.add_argument("--clamp", action="store_true",
                    help="saturate proposed-model scores at [1, 5]")
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    f = sub.add_parser("fit", help="fit model coefficients to MOS data")
    f.add_argument("--design", required=True)
    f.add_argument("--mos", required=True)
    f.add_argument("--lambda-min", type=float, default=-1.0)
    f.add_argument("--lambda-max", type=float, default=5.0)
    f.add_argument("--lambda-step", type=float, default=0.01)
    f.add_argument("--refine-tolerance", type=float, default=1e-6)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="run the repeated-split evaluation")
    e.add_argument("--design", required=True)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--mos")
    src.add_argument("--ratings", help="raw ratings; screening and MOS run first")
    e.add_argument("--screen-threshold", type=float,
                   default=analysis.DEFAULT_SCREEN_THRESHOLD)
    e.add_argument("--params")
    e.add_argument("--repeats", type=int, default=10)
    e.add_argument("--train", type=float, default=0.8)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--align-on", choices=("test", "train"), default="test")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    sr = sub.add_parser("simulate-raters", help="generate a synthetic rating table")
    sr.add_argument("--design", required=True)
    sr.add_argument("--coeffs", help="coefficients for the generating mean")
    sr.add_argument("--raters", type=int, default=20, help="conformant raters")
    sr.add_argument("--adversarial", type=int, default=0, help="random raters")
    sr.add_argument("--sos-a", type=float, default=0.132)
    sr.add_argument("--seed", type=int, default=0)
    sr.add_argument("--out", required=True)
    sr.set_defaults(func=cmd_simulate_raters)

    sc = sub.add_parser("screen", help="remove unreliable raters")
    sc.add_argument("--ratings", required=True)
    sc.add_argument("--threshold", type=float,
                    default=analysis.DEFAULT_SCREEN_THRESHOLD)
    sc.add_argument("--out", required=True, help="screened ratings file")
    sc.add_argument("--report", help="optional JSON screening report")
    sc.set_defaults(func=cmd_screen)

    m = sub.add_parser("mos", help="per-stimulus MOS/CI/SOS records")
    m.add_argument("--ratings", required=True, help="screened ratings file")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mos)

    so = sub.add_parser("sos", help="fit the SOS diversity parameter")
    so.add_argument("--mos", required=True)
    so.add_argument("--out")
    so.set_defaults(func=cmd_sos)

    ss = sub.add_parser("simulate-session", help="run the playback/preload simulator")
    ss.add_argument("--trace", required=True)
    ss.add_argument("--videos", help="videos JSON (packaged catalog if omitted)")
    ss.add_argument("--queue-depth", type=int, default=1)
    ss.add_argument("--script", required=True,
                    help="comma-separated viewing durations in seconds")
    ss.add_argument("--coeffs")
    ss.add_argument("--out", required=True)
    ss.add_argument("--events", help="optional event-log path (JSON lines)")
    ss.set_defaults(func=cmd_simulate_session)

    sv = sub.add_parser("serve", help="host the study service")
    sv.add_argument("--design", required=True)
    sv.add_argument("--ratings", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8321)
    sv.add_argument("--training", type=int, default=4)
    sv.add_argument("--no-shuffle", action="store_true")
    sv.add_argument("--subset-index", type=int, default=None)
    sv.add_argument("--subset-count", type=int, default=5)
    sv.add_argument("--seed", type=int, default=0)
    sv.add_argument("--media-dir")
    sv.set_defaults(func=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SwipeQoeError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(json.dumps({"error": "FileNotFoundError", "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
