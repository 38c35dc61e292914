"""Command-line interface: make-weights, encode, decode, metrics, verify,
serve.  CLERIC_JOBS sets the default worker count; CLERIC_NUMBA=0 selects
the pure-numpy kernel backend."""

import argparse
import json
import sys
from dataclasses import replace

from . import pipeline, store, toolkit, verify, weights
from .codec import CodecConfig, required_names


def _add_jobs(p):
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads (default: CLERIC_JOBS or CPU count)")


def _add_toggles(p):
    p.add_argument("--no-lifting", action="store_true", help="disable the lifting decomposition")
    p.add_argument("--no-drb", action="store_true", help="plain convolutions instead of deformable")
    p.add_argument("--no-r2b", action="store_true", help="drop the recurrent residual blocks")


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else pipeline.default_jobs()


def _load(args) -> store.WeightStore:
    """Load weights, applying ablation flags as config overrides.  A store
    built for the full architecture cannot serve an ablated one (different
    tensor set), so overrides fail fast with the missing name."""
    w = weights.load_weights(args.weights)
    cfg = replace(w.config,
                  lifting_enabled=w.config.lifting_enabled and not getattr(args, "no_lifting", False),
                  drb_enabled=w.config.drb_enabled and not getattr(args, "no_drb", False),
                  r2b_enabled=w.config.r2b_enabled and not getattr(args, "no_r2b", False))
    if cfg != w.config:
        w.require(required_names(cfg))
        w = store.WeightStore(config=cfg, tensors=w.tensors, factorized=w.factorized)
    return w


def cmd_make_weights(args) -> int:
    cfg = CodecConfig(hidden=args.hidden, latent=args.latent, recursions=args.recursions,
                      slices=args.slices, lifting_enabled=not args.no_lifting,
                      drb_enabled=not args.no_drb, r2b_enabled=not args.no_r2b,
                      quality=args.quality)
    w = weights.make_weights(args.seed, cfg)
    store.write_weights(w, args.out)
    print(f"wrote {args.out} ({len(w.tensors)} tensors, "
          f"codec id {w.codec_id.hex()[:16]}...)")
    return 0


def cmd_encode(args) -> int:
    w = _load(args)
    summary = pipeline.encode_slide(
        args.source, w, args.out, jobs=_jobs(args), tile_size=args.tile_size,
        chroma_min=args.tissue_chroma, luma_max=args.tissue_luma,
        min_fraction=args.tissue_fraction)
    for lv in summary["levels"]:
        print(f"level{lv['level']}: {lv['kept']}/{lv['tiles']} tiles coded "
              f"({lv['skipped']} skipped), {lv['payload_bytes']} bytes, "
              f"bpp {lv['bpp']:.4f}")
    print(f"container written to {summary['out']} in {summary['seconds']:.1f}s")
    return 0


def _parse_levels(spec):
    return None if spec is None else [int(s) for s in spec.split(",") if s != ""]


def cmd_decode(args) -> int:
    w = _load(args)
    tiles = None
    if args.tile:
        col, row = (int(v) for v in args.tile.split(","))
        tiles = [(col, row)]
    result = pipeline.decode_slide(args.container, w, args.out,
                                   levels=_parse_levels(args.levels),
                                   tiles=tiles, jobs=_jobs(args))
    print(f"decoded {result['tiles_written']} tiles to {result['out']}")
    return 0


def cmd_metrics(args) -> int:
    w = _load(args)
    report = pipeline.metrics_slide(args.source, args.container, w,
                                    jobs=_jobs(args), diff_dir=args.diff_maps)
    rows = []
    for lv in report["levels"]:
        print(f"level{lv['level']}: bpp {lv['bpp']:.4f}  psnr {lv['psnr']:.2f} dB  "
              f"ms-ssim {lv['ms_ssim']:.5f}  ({lv['coded_tiles']} coded, "
              f"{lv['skipped']} skipped)")
        rows.append((f"level{lv['level']}",
                     toolkit.RdPoint(bpp=max(lv["bpp"], 1e-12), psnr=lv["psnr"],
                                     ms_ssim=min(lv["ms_ssim"], 1.0))))
    agg = report["aggregate"]
    print(f"aggregate: {agg['payload_bytes']} bytes, bpp {agg['bpp']:.4f}")
    if args.csv_out:
        toolkit.write_rd_csv(args.csv_out, rows)
        print(f"rd csv written to {args.csv_out}")
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_verify_path(args.weights, seed=args.seed)
    failed = 0
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
        failed += not r.ok
    return 1 if failed else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app

    app = build_app(args.slides_dir, default_weights=args.weights,
                    cache_tiles=args.cache_tiles, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cleric",
                                description="Whole-slide-image codec pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    mw = sub.add_parser("make-weights", help="write a seeded weight file")
    mw.add_argument("--out", required=True)
    mw.add_argument("--seed", type=int, default=0)
    mw.add_argument("--hidden", type=int, default=192)
    mw.add_argument("--latent", type=int, default=320)
    mw.add_argument("--recursions", type=int, default=2)
    mw.add_argument("--slices", type=int, default=5)
    mw.add_argument("--quality", type=float, default=0.011)
    _add_toggles(mw)
    mw.set_defaults(fn=cmd_make_weights)

    enc = sub.add_parser("encode", help="compress a patch pyramid into a container")
    enc.add_argument("source", help="directory with level0..levelN tile images")
    enc.add_argument("--weights", required=True)
    enc.add_argument("--out", required=True)
    enc.add_argument("--tile-size", type=int, default=None)
    enc.add_argument("--tissue-chroma", type=float, default=0.06)
    enc.add_argument("--tissue-luma", type=float, default=0.92)
    enc.add_argument("--tissue-fraction", type=float, default=0.05)
    _add_jobs(enc)
    _add_toggles(enc)
    enc.set_defaults(fn=cmd_encode)

    dec = sub.add_parser("decode", help="decode container tiles to PNG")
    dec.add_argument("container")
    dec.add_argument("--weights", required=True)
    dec.add_argument("--out", required=True)
    dec.add_argument("--levels", default=None, help="comma-separated level list")
    dec.add_argument("--tile", default=None, help="single tile as col,row")
    _add_jobs(dec)
    _add_toggles(dec)
    dec.set_defaults(fn=cmd_decode)

    met = sub.add_parser("metrics", help="rate-distortion report for a container")
    met.add_argument("source")
    met.add_argument("container")
    met.add_argument("--weights", required=True)
    met.add_argument("--csv-out", default=None)
    met.add_argument("--json-out", default=None)
    met.add_argument("--diff-maps", default=None, help="directory for difference maps")
    _add_jobs(met)
    _add_toggles(met)
    met.set_defaults(fn=cmd_metrics)

    ver = sub.add_parser("verify", help="run the embedded property suite")
    ver.add_argument("--weights", required=True)
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(fn=cmd_verify)

    srv = sub.add_parser("serve", help="serve container tiles over HTTP")
    srv.add_argument("--slides-dir", required=True)
    srv.add_argument("--weights", default=None, help="fallback weight file")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--cache-tiles", type=int, default=256)
    srv.add_argument("--static-dir", default=None, help="viewer assets served at /")
    srv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (store.StoreError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
