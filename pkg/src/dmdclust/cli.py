"""Command-line front end.

Every command writes its outputs and a ``config.json`` with the resolved
settings into ``--out``.  Exit status: 0 success, 2 invalid input,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import clustering, dmd, features, hankel, imaging, io, signal_model
from .errors import NumericalError, ValidationError
from .matrix_pencil import pencil_decompose, verify_adjoint_mode_match, verify_similarity

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

LAYOUTS = {"six-region": signal_model.six_region_layout,
           "row-pair": signal_model.row_pair_layout}


class _Parser(argparse.ArgumentParser):
    # argparse already exits with status 2 on usage errors; keep the message short
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"error: {message}\n")


def _common(p, d=None, k=None, sigma=None, seed=0):
    p.add_argument("--d", type=int, default=d, help="delay count (rows per observable - 1)")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--rank", type=int, help="fixed truncation rank")
    grp.add_argument("--energy", type=float, help="keep singular values up to this energy share")
    grp.add_argument("--gap", type=float, nargs="?", const=dmd.GAP_FLOOR,
                     help="largest singular value ratio, ignoring values below this relative floor")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--sigma", type=float, default=sigma, help="noise standard deviation")
    p.add_argument("--k", type=int, default=k, help="number of flat clusters")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmdclust", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("toy", help="23-signal toy ensemble: spectrum, features, k=3 labels")
    _common(p, d=19, k=3, sigma=signal_model.TOY_SIGMA)

    for name, helptext in (("dmd", "decompose one series"),
                           ("pencil", "matrix pencil estimate of one series")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", type=Path, help="ensemble CSV")
        p.add_argument("--series", help="series_id to use (default: first)")
        p.add_argument("--dump-matrices", action="store_true",
                       help="write X, Y and the reduced operator as matrix CSVs")
        p.add_argument("--verify-pencil", "--verify", dest="verify", action="store_true",
                       help="add DMD/pencil similarity and adjoint mode residuals")
        _common(p)

    p = sub.add_parser("features", help="fit spectral features on an ensemble CSV")
    p.add_argument("input", type=Path, help="ensemble CSV")
    p.add_argument("--model", type=Path,
                   help="embed with this saved feature model instead of fitting")
    p.add_argument("--dump-matrices", action="store_true")
    _common(p)

    p = sub.add_parser("synth-lattice", help="render a synthetic multi-region lattice image")
    p.add_argument("--layout", choices=sorted(LAYOUTS), default="six-region")
    p.add_argument("--width", type=int, default=200)
    p.add_argument("--height", type=int, default=200)
    _common(p, sigma=signal_model.LATTICE_SIGMA)

    p = sub.add_parser("cluster-image", help="segment a PGM image by local scan spectra")
    p.add_argument("input", type=Path, help="8-bit binary PGM")
    p.add_argument("--neighborhood", type=int, choices=(4, 8), default=4)
    p.add_argument("--no-demean", dest="demean", action="store_false",
                   help="keep the mean of each scan window")
    p.add_argument("--mode-maps", type=int, default=4,
                   help="number of leading eigenvalues (upper half plane) to map")
    p.add_argument("--frequency", type=float, action="append", default=[],
                   help="also map the eigenvalue nearest this frequency (cycles/px)")
    _common(p, d=50, k=6)
    return parser


# ---------------------------------------------------------------------------

def _policy(args, default: dmd.TruncationPolicy) -> dmd.TruncationPolicy:
    if args.rank is not None:
        return dmd.TruncationPolicy.fixed_rank(args.rank)
    if args.energy is not None:
        return dmd.TruncationPolicy.energy(args.energy)
    if args.gap is not None:
        return dmd.TruncationPolicy.gap(args.gap)
    return default


def _config(args, policy) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in ("rank", "energy", "gap"):
            continue
        cfg[key] = str(value) if isinstance(value, Path) else value
    if policy is not None:
        cfg["truncation"] = {"kind": policy.kind, "value": policy.value}
    return cfg


def _validate(args) -> None:
    if args.d is not None and args.d < 1:
        raise ValidationError("--d must be at least 1")
    if args.sigma is not None and args.sigma < 0:
        raise ValidationError("--sigma must be nonnegative")
    if args.k is not None and args.k < 1:
        raise ValidationError("--k must be at least 1")
    if args.rank is not None and args.rank < 1:
        raise ValidationError("--rank must be at least 1")
    if args.energy is not None and not 0 < args.energy < 1:
        raise ValidationError("--energy must lie in (0, 1)")
    if args.gap is not None and not 0 < args.gap < 1:
        raise ValidationError("--gap floor must lie in (0, 1)")


def _spectrum_files(out: Path, s, eigenvalues) -> None:
    io.write_vector_csv(out / "singular_values.csv", s, name="sigma")
    io.write_vector_csv(out / "eigenvalues.csv", np.asarray(eigenvalues, dtype=complex))


def _cluster(points, graph, k: int, out: Path, ids=None) -> np.ndarray:
    dendro = clustering.ward_constrained(points, graph)
    labels = clustering.cut(dendro, k)
    io.write_dendrogram_csv(out / "dendrogram.csv", dendro)
    io.write_labels_csv(out / "labels.csv", labels, ids)
    return labels


def cmd_toy(args, policy) -> None:
    out = args.out
    ens = signal_model.make_toy_ensemble(args.seed, args.sigma)
    io.write_ensemble_csv(out / "ensemble.csv", ens)
    pair = hankel.build_ensemble_by_series(ens, args.d)
    factors = dmd.svd(pair.X)
    model, Q = features.fit(pair, policy, factors)
    _spectrum_files(out, factors.s, model.eigenvalues)
    fs = features.extract(Q, ens.n, ens.N)
    io.write_features_csv(out / "features.csv", fs.features)
    io.write_labels_csv(out / "ground_truth.csv", ens.labels)
    io.write_json(out / "feature_model.json", model.to_dict())
    _cluster(fs, clustering.complete_graph(ens.N), args.k, out)


def _load_series(args) -> np.ndarray:
    data, ids = io.read_ensemble_csv(args.input)
    if args.series is None:
        return data[0]
    if args.series not in ids:
        raise ValidationError(f"series {args.series!r} not in {args.input}")
    return data[ids.index(args.series)]


def _result_json(fit: dmd.SeriesFit, eigenvalues) -> dict:
    dec = fit.decomposition
    return {
        "rank": dec.rank,
        "singular_values": [float(s) for s in dec.singular_values],
        "eigenvalues": io.complex_list(eigenvalues),
        "reconstruction_error": fit.reconstruction_error,
        "coefficients": [io.complex_list(v) for v in fit.scaled.coefficients],
    }


def _dump(out: Path, pair, operator, name: str) -> None:
    io.write_matrix_csv(out / "X.csv", pair.X)
    io.write_matrix_csv(out / "Y.csv", pair.Y)
    io.write_matrix_csv(out / f"{name}.csv", operator)


def _single(args, policy, use_pencil: bool) -> None:
    if args.d is None:
        raise ValidationError("--d is required")
    series = _load_series(args)
    pair = hankel.build_single_series(series, args.d)
    factors = dmd.svd(pair.X)
    fit = dmd.single_series_fit(series, args.d, policy, factors)
    dec = fit.decomposition
    result = _result_json(fit, dec.eigenvalues)
    pencil = None
    if use_pencil or args.verify:
        pencil = pencil_decompose(pair, dec.rank, factors)
    if use_pencil:
        result["eigenvalues"] = io.complex_list(pencil.eigenvalues)
    if args.verify:
        result["similarity_residual"] = verify_similarity(dec, pencil)
        try:
            result["adjoint_match_residual"] = verify_adjoint_mode_match(dec, pencil)
        except NumericalError:
            result["adjoint_match_residual"] = None
    if args.dump_matrices:
        if use_pencil:
            _dump(args.out, pair, pencil.pencil_operator, "L")
        else:
            _dump(args.out, pair, dec.reduced_operator, "K")
    io.write_json(args.out / ("pencil.json" if use_pencil else "dmd.json"), result)


def cmd_features(args, policy) -> None:
    out = args.out
    data, ids = io.read_ensemble_csv(args.input)
    if args.model is not None:
        text = args.model.read_text()
        try:
            model = features.FeatureModel.loads(text)
        except ValidationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{args.model}: unreadable feature model ({exc})") from None
        if data.shape[1] < model.d:
            raise ValidationError(f"series need at least d = {model.d} samples")
        F = features.embed_many(model, data[:, :model.d, :])
        io.write_features_csv(out / "features.csv", F, ids)
        if args.k is not None:
            _cluster(F.reshape(len(F), -1), clustering.complete_graph(len(F)), args.k, out, ids)
        return
    if args.d is None:
        raise ValidationError("--d is required")
    ens = signal_model.SeriesEnsemble(data)
    pair = hankel.build_ensemble_by_series(ens, args.d)
    factors = dmd.svd(pair.X)
    model, Q = features.fit(pair, policy, factors)
    _spectrum_files(out, factors.s, model.eigenvalues)
    fs = features.extract(Q, ens.n, ens.N, ids)
    io.write_features_csv(out / "features.csv", fs.features, ids)
    io.write_json(out / "feature_model.json", model.to_dict())
    if args.dump_matrices:
        io.write_matrix_csv(out / "X.csv", pair.X)
        io.write_matrix_csv(out / "Y.csv", pair.Y)
        io.write_matrix_csv(out / "Q.csv", Q)
    if args.k is not None:
        _cluster(fs, clustering.complete_graph(ens.N), args.k, out, ids)


def cmd_synth_lattice(args, policy) -> None:
    out = args.out
    regions = LAYOUTS[args.layout](args.width, args.height)
    img = signal_model.make_lattice_image(args.width, args.height, regions,
                                          noise_sigma=args.sigma, seed=args.seed)
    io.write_pgm(out / "image.pgm", img.pixels)
    io.write_label_map_csv(out / "regions.csv", img.region_labels)
    io.write_json(out / "regions.json", {
        "model_rank": signal_model.lattice_model_rank(regions),
        "scan_frequencies": [float(f) for f in signal_model.distinct_scan_frequencies(regions)],
        "regions": [{
            "label": lab,
            "polygon": [list(map(float, v)) for v in r.polygon],
            "orientation": r.orientation,
            "period": r.period,
            "amplitude": r.amplitude,
            "harmonic": r.harmonic,
        } for lab, r in enumerate(regions, start=1)],
    })


def cmd_cluster_image(args, policy) -> None:
    out = args.out
    if args.d % 2:
        raise ValidationError("--d must be even for centred scans")
    img = io.read_pgm(args.input)
    pe = imaging.pixel_profiles(img, args.d, demean=args.demean)
    pair = hankel.build_ensemble_by_series(pe.ensemble, args.d)
    factors = dmd.svd(pair.X)
    model, Q = features.fit(pair, policy, factors)
    _spectrum_files(out, factors.s, model.eigenvalues)
    io.write_json(out / "feature_model.json", model.to_dict())
    fs = features.extract(Q, 2, pe.ensemble.N)
    graph = imaging.pixel_connectivity(pe, args.neighborhood)
    labels = _cluster(fs, graph, args.k, out)
    lmap = imaging.label_map(labels, pe)
    io.write_label_map_csv(out / "label_map.csv", lmap)
    io.write_pgm(out / "label_map.pgm", lmap / max(int(lmap.max()), 1))

    upper = [j for j in range(model.rank) if model.eigenvalues[j].imag > 0]
    chosen = upper[:args.mode_maps]
    for f in args.frequency:
        j = imaging.nearest_eigenvalue(model.eigenvalues, f)
        if j not in chosen:
            chosen.append(j)
    for j in chosen:
        xmap, ymap = imaging.mode_map(model, Q, pe, j)
        io.write_pgm(out / f"mode_{j:02d}_x.pgm", xmap)
        io.write_pgm(out / f"mode_{j:02d}_y.pgm", ymap)
    io.write_vector_csv(out / "mode_maps.csv", np.asarray(chosen), name="eigen_index")


COMMANDS = {
    "toy": (cmd_toy, dmd.TruncationPolicy.gap()),
    "dmd": (lambda a, p: _single(a, p, False), dmd.TruncationPolicy.gap()),
    "pencil": (lambda a, p: _single(a, p, True), dmd.TruncationPolicy.gap()),
    "features": (cmd_features, dmd.TruncationPolicy.gap()),
    "synth-lattice": (cmd_synth_lattice, None),
    "cluster-image": (cmd_cluster_image, dmd.TruncationPolicy.energy(0.95)),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler, default_policy = COMMANDS[args.command]
    try:
        _validate(args)
        policy = _policy(args, default_policy) if default_policy is not None else None
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_json(args.out / "config.json", _config(args, policy))
        handler(args, policy)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
