"""
Module that contains the `ducharge` command line interface. Every command returns an exit code: 0 for success or a
true statement, 1 for a checked statement that is false, 2 for usage and parse errors, 3 when a resource cap is hit and
4 when a numerical result is inconclusive.
"""

import argparse
import concurrent.futures
import itertools
import json
import logging
import pathlib
import time

import numpy as np

from . import chain
from . import charges
from . import framework
from . import gates
from . import lightcone_maps
from . import pauli_dynamics
from . import tensor_core
from . import tools

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_INCONCLUSIVE = 4

# Periods the fermion translation check runs for.
TRANSLATION_STEPS = 50


def exit_code_for(error: framework.Error):
    """Maps a ducharge error to the exit code of the command that raised it."""
    if isinstance(error, (framework.ParseError, framework.ContractViolation)):
        return EXIT_USAGE
    if isinstance(error, framework.ResourceError):
        return EXIT_RESOURCE
    if isinstance(error, framework.InconclusiveError):
        return EXIT_INCONCLUSIVE
    return EXIT_FALSE


class Context:
    """
    Creates a `Context` object that bundles the parsed arguments with the resolved run configuration.

    Attributes:
        args (argparse.Namespace): The parsed command line arguments.
        config (ducharge.framework.RunConfig): The run configuration, with command line flags applied.
        named_gates (dict): Gates defined in the configuration file, keyed by name.
        factory_path (str, None): A directory of plugin factory modules.
    """
    def __init__(self, args: argparse.Namespace):
        file_config = tools.load_config(args.config) if args.config else {}
        self.args = args
        self.config = tools.get_run_config_from_dict(file_config)
        self.factory_path = file_config.get("factory_path")
        self.named_gates = {}
        if "gates" in file_config:
            self.named_gates = tools.get_gates_from_dict(file_config, path=self.factory_path)

        # Command line flags override configuration file values
        for flag in ("tol", "seed", "L", "w_max", "workers"):
            if getattr(args, flag, None) is not None:
                setattr(self.config, flag, getattr(args, flag))
        if args.out is not None:
            self.config.out_dir = args.out
        if args.verbose:
            self.config.log_level = logging.DEBUG

    def gate(self, spec: str):
        """Resolves a gate argument, see `ducharge.tools.resolve_gate()`."""
        return tools.resolve_gate(spec, self.named_gates, self.factory_path)

    def output(self, name: str):
        """Returns the path of an output file inside the configured output directory."""
        return pathlib.Path(self.config.out_dir) / name


def _print_report(report: dict):
    """Prints a report as JSON."""
    print(json.dumps(tools.to_jsonable(report), indent=2))


def cmd_check_gate(ctx: Context):
    """Reports unitarity and dual-unitarity of one gate. Exits 0 iff the gate is dual-unitary."""
    gate = ctx.gate(ctx.args.gate)
    tol = ctx.args.tol if ctx.args.tol is not None else gates.DEFAULT_TOL
    report = {
        "gate": str(gate),
        "d": gate.d,
        "unitary": gates.is_unitary(gate, tol),
        "dual_unitary": gates.is_dual_unitary(gate, tol),
        "unitarity_residual": gates.unitarity_residual(gate),
        "duality_residual": gates.duality_residual(gate),
        "tol": tol
    }
    tools.write_json(report, ctx.output("check_gate.json"))
    _print_report(report)
    return EXIT_OK if report["dual_unitary"] else EXIT_FALSE


def cmd_find_solitons(ctx: Context):
    """Extracts the solitons of one width and direction, writing them with the full window map spectrum."""
    w = ctx.args.w if ctx.args.w is not None else 1

    # Require an odd width
    if w < 1 or w % 2 == 0:
        raise framework.ContractViolation(f"'--w' must be a positive odd integer, got {w}")

    U = ctx.gate(ctx.args.U)
    V = ctx.gate(ctx.args.V)
    direction = lightcone_maps.parse_direction(ctx.args.direction)
    tol = ctx.args.tol if ctx.args.tol is not None else lightcone_maps.UNIMODULAR_TOL

    records = lightcone_maps.find_solitons(U, V, w, direction, tol=tol, config=ctx.config)
    superop = lightcone_maps.m_w(U, V, w, direction, ctx.config)
    label = f"{'plus' if direction == lightcone_maps.PLUS else 'minus'}_w{w}"
    tools.write_json(lightcone_maps.solitons_to_list(records), ctx.output(f"solitons_{label}.json"))
    lightcone_maps.write_spectrum_csv(superop, ctx.output(f"spectrum_{label}.csv"))

    print(f"found {len(records)} width-{w} solitons moving '{direction}'")
    return EXIT_OK


def cmd_verify_charge(ctx: Context):
    """Checks conservation of a charge file under the brickwork circuit. Exits 0 iff the residual is below tol."""
    charge = charges.read_charge(ctx.args.charge)

    # Require a chain size that matches the charge
    if ctx.args.L is not None and ctx.args.L != charge.L:
        raise framework.ContractViolation(
            f"'--L' {ctx.args.L} does not match the charge chain of {charge.chain_len} sites"
        )

    F = chain.floquet(ctx.gate(ctx.args.U), ctx.gate(ctx.args.V), charge.L, ctx.config)
    tol = ctx.args.tol if ctx.args.tol is not None else ctx.config.tol
    residual = charges.verify_conserved(F, charge, ctx.config)
    report = {"L": charge.L, "residual": residual, "tol": tol, "conserved": residual < tol}
    tools.write_json(report, ctx.output("verify_charge.json"))
    _print_report(report)
    return EXIT_OK if report["conserved"] else EXIT_FALSE


def cmd_theorem1(ctx: Context):
    """Compares the brute-force conserved space with the soliton charge span. Exits 0 iff they match."""
    U = ctx.gate(ctx.args.U)
    V = ctx.gate(ctx.args.V)
    report = charges.theorem1_report(U, V, ctx.config.L, ctx.config.w_max, ctx.config)
    tools.write_json(report, ctx.output("theorem1.json"))
    _print_report(report)
    return EXIT_OK if report["match"] else EXIT_FALSE


def scan_gate(seed: int, L: int, w_max: int, settings: dict):
    """
    Surveys one seeded random dual-unitary gate: soliton counts per direction and the conserved space dimension.

    Args:
        seed (int): The seed of the gate, used for both layers.
        L (int): The half chain length of the conserved space computation.
        w_max (int): The largest soliton width and density width.
        settings (dict): `RunConfig.to_dict()` output of the caller.

    Returns:
        dict: One CSV row worth of values plus the wall time in seconds.
    """
    config = framework.RunConfig(**{key: settings[key] for key in ("tol", "max_chain_dim", "max_superop_dim")})
    started = time.perf_counter()
    gate = gates.random_dual_unitary_qubit(seed)
    solitons = charges.soliton_sets(gate, gate, w_max, config)
    space = charges.brute_force_conserved_space(gate, gate, L, w_max, config, strict=False)
    counts = {lightcone_maps.PLUS: 0, lightcone_maps.MINUS: 0}
    for (direction, _), records in solitons.items():
        counts[direction] += len(records)
    return {
        "seed": seed,
        "solitons_plus": counts[lightcone_maps.PLUS],
        "solitons_minus": counts[lightcone_maps.MINUS],
        "charge_dimension": space.dimension,
        "inconclusive": space.inconclusive,
        "seconds": time.perf_counter() - started
    }


def cmd_scan(ctx: Context):
    """Surveys `--count` random dual-unitary gates with consecutive seeds, in parallel when workers > 1."""
    count = ctx.args.count if ctx.args.count is not None else 1

    # Require at least one gate
    if count < 1:
        raise framework.ContractViolation(f"'--count' must be at least 1, got {count}")

    config = ctx.config
    seeds = list(range(config.seed, config.seed + count))
    arguments = (seeds, itertools.repeat(config.L), itertools.repeat(config.w_max), itertools.repeat(config.to_dict()))
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as executor:
            rows = list(executor.map(scan_gate, *arguments))
    else:
        rows = list(map(scan_gate, *arguments))

    header = ["seed", "solitons_plus", "solitons_minus", "charge_dimension", "inconclusive"]
    tools.write_csv(header, [[row[key] for key in header] for row in rows], ctx.output("scan.csv"))
    timings = {str(row["seed"]): row["seconds"] for row in rows}
    tools.write_json({"seconds": timings, "total_seconds": sum(timings.values())}, ctx.output("scan_timing.json"))

    for row in rows:
        log.info(f"seed {row['seed']}: {row['solitons_plus']}+/{row['solitons_minus']}- solitons "
                 f"in {row['seconds']:.3f}s")
    print(f"scanned {len(rows)} gates, {sum(1 for row in rows if row['charge_dimension'])} with conserved charges")
    return EXIT_OK


def _span_residual(op: tensor_core.LocalOperator, records):
    """Returns the relative norm of the part of `op` outside the span of the record operators."""
    if not records:
        return 1.0
    basis = np.array([tensor_core.vectorize(record.op) for record in records]).T
    vec = tensor_core.vectorize(op)
    coeffs, *_ = np.linalg.lstsq(basis, vec, rcond=None)
    return float(np.linalg.norm(basis @ coeffs - vec) / np.linalg.norm(vec))


def fswap_checks(U: gates.Gate, L: int, max_width: int, config: framework.RunConfig):
    """
    Runs the fermionic SWAP pipeline on the brickwork circuit with U on both layers.

    Args:
        U (ducharge.gates.Gate): The gate, the fermionic SWAP unless a file says otherwise.
        L (int): The half chain length of the charge checks.
        max_width (int): The widest soliton census, 3 or 5.
        config (ducharge.framework.RunConfig): The configuration whose caps and tolerance apply.

    Returns:
        dict: {"checks": {name: {"passed": bool, ...}}, "failed": [names]}.
    """
    # pylint: disable=too-many-locals
    checks = {}
    tol = config.tol
    gates.require_dual_unitary(U)
    checks["dual_unitary"] = {"passed": True, "duality_residual": gates.duality_residual(U)}

    # Soliton census
    found = {}
    for w in range(1, max_width + 1, 2):
        for direction in (lightcone_maps.PLUS, lightcone_maps.MINUS):
            found[(direction, w)] = lightcone_maps.find_solitons(U, U, w, direction, config=config)
    sigma_z = tensor_core.pauli_string("Z")
    plus_1 = found[(lightcone_maps.PLUS, 1)]
    z_residual = tensor_core.hs_norm(plus_1[0].op - sigma_z) if len(plus_1) == 1 else 1.0
    checks["solitons_w1"] = {
        "passed": len(plus_1) == 1 and z_residual < tol and abs(plus_1[0].lam - 1) < tol,
        "count": len(plus_1),
        "sigma_z_residual": z_residual
    }
    counts = {f"{direction}{w}": len(records) for (direction, w), records in sorted(found.items())}
    checks["solitons_w3"] = {"passed": counts["+3"] == 5 and counts["-3"] == 5, "counts": counts}

    # Fermion pairs sigma-minus Z^l sigma-minus are solitons for odd l
    pair_records = {}
    for gap in range(1, max_width - 1, 2):
        dense = pauli_dynamics.to_local_operator(pauli_dynamics.fermion_pair(0, gap), gap + 2)
        record = charges.soliton_from_operator(dense, U, U, lightcone_maps.PLUS)
        pair_records[gap] = record
        span = _span_residual(record.op, found[(lightcone_maps.PLUS, gap + 2)])
        checks[f"pair_l{gap}_soliton"] = {
            "passed": span < 1e-8,
            "span_residual": span,
            "step_residual": charges.soliton_step_residual(record, U, U),
            "lambda": record.lam
        }

    # Conserved charges on the 2L-site chain
    F = chain.floquet(U, U, L, config)
    residual = charges.verify_conserved(F, charges.charge_from_soliton(plus_1[0], L), config)
    checks["sigma_z_charge"] = {"passed": residual < tol, "residual": residual}
    residual = charges.verify_conserved(F, charges.charge_from_soliton(pair_records[1], L), config)
    checks["fermion_pair_charge"] = {"passed": residual < tol, "residual": residual}

    report = charges.theorem1_report(U, U, L, min(3, L, 2 * L - 4), config)
    checks["theorem1"] = {"passed": bool(report["match"]), **report}

    # Symbolic fermion dynamics
    tableau = pauli_dynamics.tableau_from_gate(U)
    worst = 0
    for j in range(4):
        fermion = pauli_dynamics.jw_fermion(j)
        shift = 2 if j % 2 == 0 else -2
        current = fermion
        for step in range(1, TRANSLATION_STEPS + 1):
            current = pauli_dynamics.brickwork_step(tableau, tableau, current)
            if current != fermion.translate(shift * step):
                worst = max(worst, step)
                break
    checks["fermion_translation"] = {"passed": worst == 0, "steps": TRANSLATION_STEPS, "first_failure": worst}

    finite = pauli_dynamics.jw_fermion(2, pauli_dynamics.FINITE_FROM_0)
    translates = pauli_dynamics.brickwork_step(tableau, tableau, finite) == finite.translate(2)
    checks["finite_string_not_translated"] = {"passed": not translates, "finite_from_0_translates": translates}

    fermions = [pauli_dynamics.jw_fermion(j) for j in range(4)]
    anticommute = all(
        pauli_dynamics.anticommutator(a, b).is_zero() for a, b in itertools.combinations_with_replacement(fermions, 2)
    )
    canonical = all(
        pauli_dynamics.anticommutator(a, a.dagger()) == pauli_dynamics.PauliSum([pauli_dynamics.PauliTerm(1.0)])
        for a in fermions
    )
    checks["fermion_anticommutation"] = {"passed": anticommute and canonical}

    pairs = [pauli_dynamics.fermion_pair(j, gap) for j in range(3) for gap in (1, 3)]
    commute = all(pauli_dynamics.commutator(a, b).is_zero() for a, b in itertools.combinations(pairs, 2))
    checks["pair_commutation"] = {"passed": commute}

    # Dense window against symbolic propagation
    pair = pauli_dynamics.fermion_pair(2, 1)
    evolved = pauli_dynamics.brickwork_step(tableau, tableau, pair)
    _, window = chain.light_cone_step(U, U, pauli_dynamics.to_local_operator(pair.translate(-2), 3), 2, 8)
    mismatch = float(np.max(np.abs(window.matrix - pauli_dynamics.to_local_operator(evolved, 7).matrix)))
    checks["dense_symbolic_crosscheck"] = {"passed": mismatch < 1e-12, "max_entry_difference": mismatch}

    failed = [name for name, check in checks.items() if not check["passed"]]
    return {"checks": checks, "failed": failed}


def cmd_fswap_demo(ctx: Context):
    """Runs the fermionic SWAP pipeline and writes one report. Exits 1 naming every failed check."""
    max_width = ctx.args.w if ctx.args.w is not None else 3

    # Require the census widths the checks know about
    if max_width not in (3, 5):
        raise framework.ContractViolation(f"'--w' must be 3 or 5 for this demo, got {max_width}")

    U = ctx.gate(ctx.args.gate) if ctx.args.gate else gates.fswap()
    report = fswap_checks(U, ctx.config.L, max_width, ctx.config)
    tools.write_json(report, ctx.output("fswap_demo.json"))
    _print_report(report)

    if report["failed"]:
        log.error(f"fswap demo checks failed: {', '.join(report['failed'])}")
        return EXIT_FALSE
    return EXIT_OK


def get_parser():
    """Builds the argument parser with one sub-command per analysis."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file with 'run', 'gates' and 'factory_path' values")
    common.add_argument("--tol", type=float, help="tolerance of the checked statement")
    common.add_argument("--seed", type=int, help="seed of random draws")
    common.add_argument(
        "--L", type=int, help="half chain length; verify-charge only checks it against the chain of the charge file"
    )
    common.add_argument("--w", type=int, help="soliton width")
    common.add_argument("--w-max", dest="w_max", type=int, help="largest density width")
    common.add_argument("--direction", default="plus", help="plus or minus")
    common.add_argument("--out", help="output directory")
    common.add_argument("--count", type=int, help="number of gates to scan")
    common.add_argument("--workers", type=int, help="worker processes for scans")
    common.add_argument("--verbose", action="store_true", help="log debug messages")

    parser = argparse.ArgumentParser(
        prog="ducharge", description="Solitons and conserved charges of brickwork dual-unitary circuits"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    check_gate = commands.add_parser("check-gate", parents=[common], help="check (dual-)unitarity of a gate")
    check_gate.add_argument("gate", help="gate JSON file or @name")
    check_gate.set_defaults(handler=cmd_check_gate)

    find_solitons = commands.add_parser("find-solitons", parents=[common], help="extract solitons of one width")
    find_solitons.add_argument("U", help="even-bond gate JSON file or @name")
    find_solitons.add_argument("V", help="odd-bond gate JSON file or @name")
    find_solitons.set_defaults(handler=cmd_find_solitons)

    verify_charge = commands.add_parser("verify-charge", parents=[common], help="check conservation of a charge")
    verify_charge.add_argument("charge", help="charge JSON file")
    verify_charge.add_argument("U", help="even-bond gate JSON file or @name")
    verify_charge.add_argument("V", help="odd-bond gate JSON file or @name")
    verify_charge.set_defaults(handler=cmd_verify_charge)

    theorem1 = commands.add_parser("theorem1", parents=[common], help="compare conserved space and soliton charges")
    theorem1.add_argument("U", help="even-bond gate JSON file or @name")
    theorem1.add_argument("V", help="odd-bond gate JSON file or @name")
    theorem1.set_defaults(handler=cmd_theorem1)

    scan = commands.add_parser("scan", parents=[common], help="survey random dual-unitary gates")
    scan.set_defaults(handler=cmd_scan)

    fswap_demo = commands.add_parser("fswap-demo", parents=[common], help="run the fermionic SWAP pipeline")
    fswap_demo.add_argument("--gate", help="gate JSON file or @name used instead of the fermionic SWAP")
    fswap_demo.set_defaults(handler=cmd_fswap_demo)

    return parser


def main(argv=None):
    """
    Runs the command line interface.

    Args:
        argv (list, None): The arguments, `sys.argv[1:]` when `None`.

    Returns:
        int: The exit code.
    """
    try:
        args = get_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        ctx = Context(args)
    except framework.Error as error:
        log.error(f"invalid configuration ({error})")
        return EXIT_USAGE if not isinstance(error, framework.ResourceError) else EXIT_RESOURCE

    try:
        framework.setup_logging(ctx.config.log_level)
        log.debug(f"running '{args.command}' with {ctx.config.to_dict()}")
        return args.handler(ctx)
    except framework.Error as error:
        code = exit_code_for(error)
        log.error(f"{args.command} failed ({error})")
        diagnostics = getattr(error, "diagnostics", None)
        if diagnostics:
            log.error(f"diagnostics: {tools.to_jsonable(diagnostics)}")
        return code
