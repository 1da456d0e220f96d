"""Command-line front end: micromaser {steady,evolve,spectrum,walls,wigner,metastable,sweep}."""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channels import (
    AtomState,
    GaussQuadrature,
    MonteCarlo,
    ThermalAtomSpec,
    beam_averaged_map,
    decay_modified_map,
    decay_reduced_rate,
    discrete_map,
    generator_L0,
    kraus_thermal_atom,
    kraus_two_photon,
    loss_dissipator,
)
from .config import COMMANDS, RunConfig, RunSection, parse_config
from .errors import ConfigError, MicromaserError
from .evolve import beam_trajectory_average, evolve_continuous, evolve_discrete_at, evolve_kraus_at, spectrum
from .fock import basis, coherent_state, expectation, fidelity, ket_to_dm, parity_op, wigner
from .io import Provenance, dumps_csv, dumps_json, format_number, read_csv, write_text
from .meta import (
    combined_steady,
    dephasing_generator,
    dfs_eigen_and_classical,
    eff_dephasing_rate,
    eff_loss_generator,
)
from .metrology import metrology_report
from .steady import conserved_coherence, pure_sector, pure_stationary, thermal_steady
from .walls import hard_walls_at, phi_for_wall, wall_sequence

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
ZERO_EIGENVALUE = 1e-9
SWEEP_COLUMNS = ("c_e", "K", "phi", "k_atoms", "mean_n", "var_n", "qfi", "enhancement", "purity")
EVOLVE_COLUMNS = ("k", "time", "trace", "purity", "mean_n", "var_n", "parity", "qfi", "enhancement", "fidelity")


def _atom(config, c_e=None):
    if c_e is not None:
        return AtomState.from_excited(c_e)
    if config.model.atom_mix == "thermal":
        return AtomState(1.0, 0.0)
    c_g, c_e = config.model.atom_amplitudes()
    return AtomState(c_g, c_e)


def _phi(config, K=None, phi=None):
    model = config.model
    if phi is not None:
        return phi
    if model.phi is not None:
        return model.phi
    return phi_for_wall(model.m, model.K if K is None else K)


def _n_max(config):
    if config.model.n_max is None:
        raise ConfigError("model.n_max is required for this command")
    return config.model.n_max


def _thermal(config):
    return ThermalAtomSpec(p1=config.model.p1, p3=config.model.p3)


def single_atom_map(config, atom, phi, seed=None):
    """Superoperator for one passing atom with the configured beam spread or decay."""
    noise, n_max = config.noise, _n_max(config)
    if config.model.atom_mix == "thermal":
        return discrete_map(kraus_thermal_atom(_thermal(config), phi, (0.0, 0.0), n_max))
    if noise.gamma1 > 0 or noise.gamma3 > 0:
        coupling = phi / noise.tau
        return decay_modified_map(atom, coupling, noise.tau, (noise.gamma1, noise.gamma3), noise.t_prep, n_max)
    if noise.beam_sigma > 0:
        if noise.monte_carlo:
            scheme = MonteCarlo(noise.trajectories, noise.seed if seed is None else seed)
        else:
            scheme = GaussQuadrature(noise.beam_order)
        return beam_averaged_map(atom, phi, noise.beam_sigma, n_max, scheme)
    return discrete_map(kraus_two_photon(atom, phi, n_max))


def _atom_rate(config, atom):
    noise = config.noise
    if noise.gamma1 > 0 or noise.gamma3 > 0:
        return decay_reduced_rate(atom, (noise.gamma1, noise.gamma3), noise.t_prep, config.model.nu)
    return config.model.nu


def generator(config, atom, phi):
    """nu (S - 1) plus single-photon loss when kappa > 0."""
    superop = single_atom_map(config, atom, phi)
    result = _atom_rate(config, atom) * (superop - np.eye(superop.shape[0]))
    if config.noise.kappa > 0:
        result = result + loss_dissipator(config.noise.kappa, config.noise.n_th, _n_max(config))
    return result


def _initial_state(config):
    n_max, run = _n_max(config), config.run
    if run.initial == "coherent":
        return ket_to_dm(coherent_state(n_max, run.alpha))
    return ket_to_dm(basis(n_max, 1 if run.initial == "one" else 0))


def _trajectory(config, atom, phi, ks, seed=None):
    """[(k, rho)] after k atoms; continuous in time k / nu when kappa > 0."""
    noise, rho = config.noise, _initial_state(config)
    if noise.kappa > 0:
        times = [k / config.model.nu for k in ks]
        return [(k, state) for k, (_, state) in zip(ks, evolve_continuous(generator(config, atom, phi), rho, times))]
    if noise.monte_carlo and config.model.atom_mix == "pure" and noise.gamma1 == 0 and noise.gamma3 == 0:
        trajectory_seed = noise.seed if seed is None else seed
        return beam_trajectory_average(atom, phi, noise.beam_sigma, rho, ks, noise.trajectories, trajectory_seed)
    plain = noise.beam_sigma == 0 and noise.gamma1 == 0 and noise.gamma3 == 0
    if plain and config.model.atom_mix == "pure":
        return evolve_kraus_at(kraus_two_photon(atom, phi, _n_max(config)), rho, ks)
    return evolve_discrete_at(single_atom_map(config, atom, phi, seed), rho, ks)


def _metrics(rho):
    report = metrology_report(rho)
    return {
        "mean_n": report.mean_n,
        "var_n": report.var_n,
        "qfi": report.qfi,
        "enhancement": report.enhancement,
        "purity": report.purity,
    }


def _target_state(config, atom, phi):
    """Dark-state mixture carrying the initial parity weights; None if a needed sector has no dark state."""
    if config.model.atom_mix == "thermal":
        return None
    n_max = _n_max(config)
    even_weight = float(np.real(np.trace(parity_op(n_max) @ _initial_state(config))) + 1.0) / 2.0
    target = np.zeros((n_max, n_max), dtype=complex)
    for parity, weight in ((1, even_weight), (-1, 1.0 - even_weight)):
        if weight < 1e-12:
            continue
        try:
            ket, _ = pure_sector(atom, phi, n_max, parity)
        except MicromaserError:
            return None
        target += weight * ket_to_dm(ket)
    return target


def command_evolve(config):
    atom, phi = _atom(config), _phi(config)
    target = _target_state(config, atom, phi)
    parity = parity_op(_n_max(config))
    rows = []
    for k, rho in _trajectory(config, atom, phi, list(config.run.k)):
        row = {"k": k, "time": k / config.model.nu, "trace": float(np.trace(rho).real)}
        row.update(_metrics(rho))
        row["parity"] = float(expectation(parity, rho).real)
        row["fidelity"] = fidelity(target, rho) if target is not None else float("nan")
        rows.append(row)
    return EVOLVE_COLUMNS, rows


def _state_summary(ket, bound):
    summary = _metrics(ket_to_dm(ket))
    summary["support_bound"] = bound
    summary["coefficients"] = ket
    return summary


def command_steady(config):
    n_max, phi = _n_max(config), _phi(config)
    if config.model.atom_mix == "thermal":
        spec = _thermal(config)
        return {
            "phi": phi,
            "even": _metrics(thermal_steady(spec, 1.0, n_max)),
            "odd": _metrics(thermal_steady(spec, 0.0, n_max)),
            "ratio": spec.p3 / spec.p1,
        }
    result = {"phi": phi, "walls": [wall.to_dict() for wall in hard_walls_at(phi, n_max)]}
    for name, parity in (("plus", 1), ("minus", -1)):
        try:
            result[name] = _state_summary(*pure_sector(_atom(config), phi, n_max, parity))
        except MicromaserError as error:
            result[name] = {"error": str(error)}
    return result


def command_spectrum(config):
    matrix = generator(config, _atom(config), _phi(config))
    report = spectrum(matrix)
    scale = max(float(np.abs(matrix).max()), 1e-300)
    zero = int(np.sum(np.abs(report.eigenvalues) <= ZERO_EIGENVALUE * scale))
    count = config.run.eigenvalues
    return {
        "eigenvalues": report.eigenvalues[:count],
        "gaps": report.gaps[: max(count - 1, 0)],
        "metastable_flags": report.metastable_flags[: max(count - 1, 0)],
        "zero_eigenvalues": zero,
    }


def command_walls(config, m1, k1, count):
    model = config.model
    m1 = model.m if m1 is None else m1
    k1 = model.K if k1 is None else k1
    if m1 is None or k1 is None:
        raise ConfigError("walls needs --m1 and --k1 (or model.m and model.K)")
    sequence = wall_sequence(m1, k1, count if count is not None else config.run.count)
    return {"D": sequence.D, "positions": sequence.positions, "walls": [wall.to_dict() for wall in sequence.walls]}


def command_wigner(config):
    parity = 1 if config.run.state == "plus" else -1
    ket, _ = pure_sector(_atom(config), _phi(config), _n_max(config), parity)
    grid = wigner(ket, config.run.re_bounds, config.run.im_bounds, config.run.resolution)
    return grid


def command_metastable(config):
    atom, phi, n_max, nu = _atom(config), _phi(config), _n_max(config), config.model.nu
    kraus = kraus_two_photon(atom, phi, n_max)
    pair = pure_stationary(atom, phi, n_max)
    coherence = conserved_coherence(generator_L0(kraus, nu), pair)
    loss = eff_loss_generator(pair, coherence, config.noise.kappa)
    noise = config.noise
    omega, gamma = 0.0, 0.0
    if noise.beam_sigma > 0 or noise.gamma1 > 0 or noise.gamma3 > 0:
        omega, gamma = eff_dephasing_rate(single_atom_map(config, atom, phi), discrete_map(kraus), pair, coherence, nu)
    total = loss + dephasing_generator(omega, gamma)
    report = dfs_eigen_and_classical(total, pair)
    n_plus, n_minus = loss.metadata["n_plus"], loss.metadata["n_minus"]
    p_plus = float("nan")
    if noise.kappa > 0:
        p_plus = combined_steady(pair, (n_plus, n_minus), (0.0, 0.0), noise.kappa, nu).p_plus
    eta = loss.metadata["eta_loss"]
    return {
        "n_plus": n_plus,
        "n_minus": n_minus,
        "eta": abs(eta),
        "eta_complex": eta,
        "Omega": omega,
        "gamma_deph": gamma,
        "eigenvalues": report.eigenvalues,
        "classical": report.classical,
        "p_plus": p_plus,
    }


def sweep_plan(config):
    """Grid jobs (index, c_e, K, phi) in deterministic order; K or phi varies with the wall spec."""
    c_e_values = config.grid_axis("c_e")
    if c_e_values is None:
        c_e_values = (config.model.atom_amplitudes()[1],)
    K_values = config.grid_axis("K")
    phi_values = config.grid_axis("phi")
    if K_values is not None:
        couplings = [(K, None) for K in K_values]
    elif phi_values is not None:
        couplings = [(None, phi) for phi in phi_values]
    else:
        couplings = [(config.model.K, config.model.phi)]
    jobs = []
    for c_e in c_e_values:
        for K, phi in couplings:
            jobs.append((len(jobs), c_e, K, phi))
    return jobs


def _row_key(c_e, K, phi, k):
    return tuple(format_number(value) if value is not None else "" for value in (c_e, K, phi, k))


def _sweep_job(payload):
    config, (index, c_e, K, phi) = payload
    atom = _atom(config, c_e)
    coupling = _phi(config, K, phi)
    seed = None
    if config.noise.seed is not None:
        seed = int(np.random.SeedSequence([config.noise.seed, index]).generate_state(1, np.uint64)[0])
    rows = []
    for k, rho in _trajectory(config, atom, coupling, list(config.run.k), seed):
        row = {"c_e": c_e, "K": "" if K is None else K, "phi": coupling, "k_atoms": k}
        row.update(_metrics(rho))
        rows.append(row)
    return rows


def run_sweep(config, out_path=None, jobs=1):
    """Run (or resume) the grid sweep; returns the CSV text written to ``out_path``."""
    out_path = out_path or config.run.output
    existing, _ = read_csv(out_path) if out_path else ([], None)
    done = {(row["c_e"], row["K"], row["phi"] if row["K"] == "" else "", row["k_atoms"]): row for row in existing}
    plan = sweep_plan(config)
    todo = []
    for job in plan:
        _, c_e, K, phi = job
        keys = [_row_key(c_e, K, phi if K is None else None, k) for k in config.run.k]
        if not all(key in done for key in keys):
            todo.append(job)
    payloads = [(config, job) for job in todo]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, payloads))
    else:
        results = [_sweep_job(payload) for payload in payloads]
    fresh = {job[0]: rows for job, rows in zip(todo, results)}
    rows = []
    for job in plan:
        index, c_e, K, phi = job
        if index in fresh:
            rows.extend(fresh[index])
            continue
        for k in config.run.k:
            rows.append(done[_row_key(c_e, K, phi if K is None else None, k)])
    provenance = Provenance(config.digest(), config.noise.seed)
    text = dumps_csv(SWEEP_COLUMNS, rows, provenance)
    if out_path:
        write_text(out_path, text)
    return text, len(todo)


def _render(result, config, fmt, columns=None):
    provenance = Provenance(config.digest(), config.noise.seed)
    if fmt == "csv":
        if columns is None:
            raise ConfigError("this command supports only --format json")
        return dumps_csv(columns, result, provenance)
    if columns is not None:
        result = [dict(row) for row in result]
    return dumps_json(result, provenance)


def _wigner_render(grid, config, fmt):
    provenance = Provenance(config.digest(), config.noise.seed)
    if fmt == "csv":
        rows = [
            {"re": re_value, "im": im_value, "W": grid.values[i, j]}
            for i, im_value in enumerate(grid.im_axis)
            for j, re_value in enumerate(grid.re_axis)
        ]
        bounds = {
            "re_min": grid.re_min,
            "re_max": grid.re_max,
            "im_min": grid.im_min,
            "im_max": grid.im_max,
            "resolution": grid.resolution,
        }
        return dumps_csv(("re", "im", "W"), rows, provenance, bounds)
    payload = {"re_axis": grid.re_axis, "im_axis": grid.im_axis, "values": grid.values, "integral": grid.integral()}
    return dumps_json(payload, provenance)


def build_parser():
    parser = argparse.ArgumentParser(prog="micromaser", description="Two-photon micromaser simulations.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    parser.add_argument("--seed", type=int, help="override noise.seed")
    parser.add_argument("--n-max", type=int, dest="n_max", help="override model.n_max")
    parser.add_argument("--format", choices=("csv", "json"), help="output format")
    parser.add_argument("--m1", type=int, help="walls: first wall position")
    parser.add_argument("--k1", type=int, help="walls: half-turn count of the first wall")
    parser.add_argument("--count", type=int, help="walls: number of walls")
    return parser


def _load(args):
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as error:
            raise ConfigError(f"cannot read {args.config}: {error.strerror}") from error
        config = parse_config(text)
    else:
        config = RunConfig(run=RunSection())
    return config.override(seed=args.seed, n_max=args.n_max, command=args.command)


def _execute(args):
    config = _load(args)
    command = args.command
    if command == "sweep":
        text, _ = run_sweep(config, args.out, args.jobs)
        return None if (args.out or config.run.output) else text
    if command == "evolve":
        columns, rows = command_evolve(config)
        return _render(rows, config, args.format or "csv", columns)
    if command == "wigner":
        return _wigner_render(command_wigner(config), config, args.format or "csv")
    handlers = {
        "steady": command_steady,
        "spectrum": command_spectrum,
        "metastable": command_metastable,
        "walls": lambda cfg: command_walls(cfg, args.m1, args.k1, args.count),
    }
    return _render(handlers[command](config), config, args.format or "json")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = _execute(args)
    except ConfigError as error:
        print(f"config error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except (MicromaserError, ArithmeticError, np.linalg.LinAlgError) as error:
        print(f"numerical error: {error}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as error:
        print(f"io error: {error.filename}: {error.strerror}", file=sys.stderr)
        return EXIT_NUMERICAL
    if text is not None:
        if args.out and args.command != "sweep":
            write_text(args.out, text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
