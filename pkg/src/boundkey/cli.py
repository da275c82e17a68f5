"""Command-line front door.

Every subcommand prints a stream of JSON lines: first a header record
with the tool version, seeds, tolerances and conventions, then one
record per result.  Exit codes: 0 on success, 2 on malformed input,
3 when a certification is statistically infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata

import numpy as np

from .keyrate import (
    CertificationInfeasibleError,
    bell_twirl,
    canonical_twisting,
    ccq_from_state,
    certified_bounds,
    dw_rate,
    er_upper_bound,
    holevo_rate,
    privacy_squeeze,
)
from .linalg import DensityOperator, trace_norm, von_neumann_entropy
from .observables import (
    build_observables,
    expansion_differences,
    expectation,
    min_settings_cover,
)
from .ppt import (
    NPT_FLAG_TOL,
    PPT_MEMBERSHIP_TOL,
    extremality_scan,
    ppt_check,
    ppt_invariance,
    robustness_scan,
    robustness_threshold,
)
from .serialize import load_records, load_state, save_records, save_state, scheme_hash
from .shots import estimate_parameters, sample_prepared, sample_scheme
from .states import (
    depolarize,
    fourier,
    hadamard,
    key_ratio,
    mixture_from_unitary,
    rho_h,
    rho_h_preparation,
    rho_u,
)

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_INFEASIBLE = 3


def _version() -> str:
    try:
        return metadata.version("boundkey")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _emit(record: str, **fields) -> None:
    print(json.dumps({"record": record, **_jsonable(fields)}))


def _emit_header(command: str, **extra) -> None:
    _emit(
        "header",
        tool="boundkey",
        version=_version(),
        command=command,
        conventions={
            "log_base": 2,
            "subsystem_order": "A B A' B'",
            "transpose_cut": "B B'",
        },
        tolerances={
            "ppt_membership": PPT_MEMBERSHIP_TOL,
            "npt_flag": NPT_FLAG_TOL,
        },
        **extra,
    )


def _corner_blocks(rho: DensityOperator) -> tuple[np.ndarray, np.ndarray]:
    d2 = rho.mat.shape[0] // 4
    return (
        rho.mat[0 * d2 : 1 * d2, 3 * d2 : 4 * d2],
        rho.mat[1 * d2 : 2 * d2, 2 * d2 : 3 * d2],
    )


def _load_state_arg(args) -> DensityOperator:
    if args.state is None:
        return rho_h()
    return load_state(args.state)


def _unitary_for(args) -> np.ndarray:
    if args.preset == "hadamard":
        return hadamard()
    if args.preset == "fourier-d3":
        return fourier(3)
    if args.preset == "identity":
        return np.eye(2)
    doc = json.loads(open(args.preset).read())
    entries = doc["matrix"]
    d = int(round(len(entries) ** 0.5))
    if d * d != len(entries):
        raise ValueError(f"unitary file holds {len(entries)} entries, not a square")
    return np.array([complex(re, im) for re, im in entries]).reshape(d, d)


def _cmd_gen(args) -> int:
    _emit_header("gen", preset=args.preset)
    u = _unitary_for(args)
    state, p1, p2 = rho_u(u)
    save_state(state, args.out)
    _emit(
        "state",
        path=str(args.out),
        dims=state.dims,
        weight_correlated=p1,
        weight_anticorrelated=p2,
        bias_ratio=key_ratio(u),
    )
    return EXIT_OK


def _cmd_ppt(args) -> int:
    _emit_header("ppt", state=args.state)
    rho = _load_state_arg(args)
    is_ppt, min_eig = ppt_check(rho)
    _emit("membership", is_ppt=is_ppt, min_eig=min_eig)
    _emit("invariance", max_deviation=ppt_invariance(rho))
    if args.extremality:
        x1, x2 = _corner_blocks(rho)
        p1 = 2.0 * trace_norm(x1)
        lo = max(p1 - args.extremality_span, 1e-6)
        hi = min(p1 + args.extremality_span, 1.0 - 1e-6)
        for pt in extremality_scan(x1, x2, np.linspace(lo, hi, args.grid)):
            _emit("extremality", weight=pt.weight, min_eig=pt.min_eig, is_npt=pt.is_npt)
    if args.robustness:
        report = robustness_scan(rho, np.linspace(0.0, args.noise_max, args.grid))
        for pt in report.points:
            _emit(
                "robustness",
                noise=pt.noise,
                min_eig=pt.min_eig,
                key_bound=pt.key_bound,
            )
        threshold = robustness_threshold(rho, hi=max(args.noise_max, 1e-3))
        _emit(
            "robustness_summary",
            largest_positive_noise=report.largest_positive_noise,
            threshold_noise=threshold,
        )
    return EXIT_OK


def _cmd_key(args) -> int:
    _emit_header("key", state=args.state)
    rho = _load_state_arg(args)
    x1, x2 = _corner_blocks(rho)
    tau = canonical_twisting(x1, x2)
    sigma = privacy_squeeze(rho, tau)
    dw_squeezed = dw_rate(ccq_from_state(sigma))
    dw_conservative = dw_rate(ccq_from_state(rho, conservative=True))
    spectrum = bell_twirl(sigma)
    d = np.real(np.diag(sigma.mat))
    report = certified_bounds(
        d,
        float(np.real(sigma.mat[0, 3])),
        float(np.imag(sigma.mat[0, 3])),
        float(np.real(sigma.mat[1, 2])),
        float(np.imag(sigma.mat[1, 2])),
    )
    _emit(
        "key_bounds",
        dw_squeezed=dw_squeezed,
        dw_conservative=dw_conservative,
        twirl_hashing=report.twirl_hashing,
        info_minus_twirl_entropy=report.info_minus_twirl_entropy,
        holevo_difference=holevo_rate(ccq_from_state(sigma)),
        twirl_spectrum=spectrum.weights,
    )
    _emit(
        "recurrence",
        improves=bool(report.recurrence_per_copy_rate > report.twirl_hashing),
        acceptance=report.recurrence_acceptance,
        per_copy_rate=report.recurrence_per_copy_rate,
        two_way_positive=report.two_way_flag,
    )
    return EXIT_OK


def _cmd_er(args) -> int:
    _emit_header("er", state=args.state, seed=args.seed)
    rho = _load_state_arg(args)
    result = er_upper_bound(
        rho,
        budget_seconds=args.budget_seconds,
        restarts=args.restarts,
        seed=args.seed,
    )
    _emit(
        "er_upper_bound",
        value=result.value,
        restarts_completed=result.restarts_completed,
        witness_components=len(result.witness.weights),
    )
    return EXIT_OK


def _cmd_observables(args) -> int:
    _emit_header("observables", state=args.state)
    rho = _load_state_arg(args)
    x1, x2 = _corner_blocks(rho)
    obs = build_observables(canonical_twisting(x1, x2))
    for name, op in obs.named().items():
        _emit("expectation", observable=name, value=expectation(op, rho))
    if rho.dims == (2, 2, 2, 2):
        diffs = expansion_differences(obs)
        items = [
            {"observable": name, "string": letters, "built": b, "reference": r}
            for name, terms in diffs.items()
            for letters, b, r in terms
        ]
        _emit(
            "expansion_comparison",
            differing_terms=len(items),
            max_difference=max((abs(i["built"] - i["reference"]) for i in items), default=0.0),
            terms=items,
        )
    return EXIT_OK


def _cmd_settings(args) -> int:
    _emit_header("settings", state=args.state, max_size=args.max_size)
    rho = _load_state_arg(args)
    x1, x2 = _corner_blocks(rho)
    obs = build_observables(canonical_twisting(x1, x2))
    groups = {
        "key": [obs.o1],
        "coherence": [obs.r1, obs.i1, obs.r2, obs.i2],
        "all": [obs.o1, obs.r1, obs.i1, obs.r2, obs.i2],
    }
    cover = min_settings_cover(groups[args.targets], max_size=args.max_size)
    _emit(
        "settings_cover",
        targets=args.targets,
        feasible=cover.feasible,
        size=cover.size,
        settings=[s.name() for s in cover.settings],
        max_residual=cover.max_residual,
        exhausted_up_to=cover.exhausted_up_to,
    )
    return EXIT_OK


_SCHEME_CACHE: dict[bytes, object] = {}


def _scheme_for(rho: DensityOperator):
    # The exhaustive cover search costs seconds; simulate and certify both
    # need it for the same state, so memoize on the matrix bytes.
    key = rho.mat.tobytes()
    cached = _SCHEME_CACHE.get(key)
    if cached is not None:
        return cached
    x1, x2 = _corner_blocks(rho)
    obs = build_observables(canonical_twisting(x1, x2))
    scheme = min_settings_cover([obs.o1, obs.r1, obs.i1, obs.r2, obs.i2])
    if not scheme.feasible:
        raise ValueError("no feasible settings scheme for this state")
    _SCHEME_CACHE[key] = scheme
    return scheme


def _cmd_simulate(args) -> int:
    _emit_header("simulate", state=args.state, seed=args.seed, shots=args.shots,
                 noise=args.noise)
    rho = _load_state_arg(args)
    scheme = _scheme_for(rho)
    sampled = depolarize(rho, args.noise) if args.noise else rho
    if args.prepared:
        if args.noise:
            raise ValueError("the prepared-ensemble sampler models the noiseless recipe")
        from .linalg import max_abs_distance

        if max_abs_distance(rho.mat, rho_h().mat) > 1e-10:
            raise ValueError(
                "the prepared-ensemble sampler is defined for the flagship state"
            )
        components = rho_h_preparation()
        records = [
            sample_prepared(components, s, args.shots, args.seed, index=i)
            for i, s in enumerate(scheme.settings)
        ]
    else:
        records = sample_scheme(sampled, scheme.settings, args.shots, args.seed)
    digest = scheme_hash(scheme)
    save_records(records, args.out, seed=args.seed, scheme_digest=digest)
    _emit(
        "records",
        path=str(args.out),
        scheme=digest,
        settings=[s.name() for s in scheme.settings],
        shots_per_setting=args.shots,
    )
    return EXIT_OK


def _cmd_certify(args) -> int:
    _emit_header("certify", state=args.state, records=args.records, delta=args.delta)
    rho = _load_state_arg(args)
    scheme = _scheme_for(rho)
    records, meta = load_records(args.records)
    digest = scheme_hash(scheme)
    if meta.get("scheme") not in (None, digest):
        raise ValueError(
            f"records were produced for scheme {meta.get('scheme')[:12]}..., "
            f"expected {digest[:12]}..."
        )
    report = estimate_parameters(records, scheme, delta=args.delta)
    _emit(
        "estimates",
        diag=report.diag,
        diag_radii=report.diag_radii,
        re_a=report.re_a,
        im_a=report.im_a,
        re_b=report.re_b,
        im_b=report.im_b,
        coherence_radii=report.coherence_radii,
        corr_weight=report.corr_weight,
        corr_weight_radius=report.corr_weight_radius,
        delta=report.delta,
    )
    if report.certified_bound is None:
        raise CertificationInfeasibleError(
            "no point of the confidence rectangle is a valid spectrum"
        )
    _emit(
        "certification",
        raw_bound=report.raw_bound,
        certified_bound=report.certified_bound,
        positive=bool(report.certified_bound > 0.0),
    )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundkey",
        description="Construct, certify and verify key-carrying PPT-invariant states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="construct a state and write it to a file")
    gen.add_argument(
        "preset",
        help="named unitary (hadamard, fourier-d3, identity) or a JSON unitary file",
    )
    gen.add_argument("--out", required=True, help="state file to write")
    gen.set_defaults(func=_cmd_gen)

    ppt = sub.add_parser("ppt", help="PPT membership, invariance and region reports")
    ppt.add_argument("--state", help="state file (default: the flagship instance)")
    ppt.add_argument("--extremality", action="store_true", help="scan mixture weights")
    ppt.add_argument("--robustness", action="store_true", help="scan white noise")
    ppt.add_argument("--grid", type=int, default=21, help="scan points per report")
    ppt.add_argument("--extremality-span", type=float, default=0.1)
    ppt.add_argument("--noise-max", type=float, default=0.01)
    ppt.set_defaults(func=_cmd_ppt)

    key = sub.add_parser("key", help="key-rate bounds of a state")
    key.add_argument("--state", help="state file (default: the flagship instance)")
    key.set_defaults(func=_cmd_key)

    er = sub.add_parser("er", help="search an upper bound on relative entropy of entanglement")
    er.add_argument("--state", help="state file (default: the flagship instance)")
    er.add_argument("--budget-seconds", type=float, default=60.0)
    er.add_argument("--restarts", type=int, default=256)
    er.add_argument("--seed", type=int, default=0)
    er.set_defaults(func=_cmd_er)

    obs = sub.add_parser("observables", help="verification observables of a state")
    obs.add_argument("--state", help="state file (default: the flagship instance)")
    obs.set_defaults(func=_cmd_observables)

    settings = sub.add_parser("settings", help="search minimal measurement schemes")
    settings.add_argument("--state", help="state file (default: the flagship instance)")
    settings.add_argument(
        "--targets", choices=("key", "coherence", "all"), default="all"
    )
    settings.add_argument("--max-size", type=int, default=13)
    settings.set_defaults(func=_cmd_settings)

    sim = sub.add_parser("simulate", help="sample shot records for a scheme")
    sim.add_argument("--state", help="state file (default: the flagship instance)")
    sim.add_argument("--shots", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--noise", type=float, default=0.0, help="white-noise weight")
    sim.add_argument(
        "--prepared",
        action="store_true",
        help="sample via the two-ensemble preparation recipe",
    )
    sim.add_argument("--out", required=True, help="records file to write")
    sim.set_defaults(func=_cmd_simulate)

    cert = sub.add_parser("certify", help="estimate parameters and certify a key bound")
    cert.add_argument("--state", help="state file (default: the flagship instance)")
    cert.add_argument("--records", required=True, help="records file to read")
    cert.add_argument("--delta", type=float, default=0.05)
    cert.set_defaults(func=_cmd_certify)

    return parser


def run(argv=None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CertificationInfeasibleError as exc:
        _emit("error", kind="certification_infeasible", message=str(exc))
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, OSError) as exc:
        _emit("error", kind="malformed_input", message=str(exc))
        return EXIT_MALFORMED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
