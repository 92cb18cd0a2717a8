"""Command-line interface: reproducible imaginary-time evolution runs.

Commands
--------
decompose   print (and optionally verify) the hidden-unit decomposition of
            a single interaction exp(-K Z...Z)
evolve      compile and run imaginary-time evolution for a Hamiltonian file,
            emitting one CSV row per requested tau checkpoint
ising-demo  the built-in 3-qubit critical transverse-field Ising benchmark
ldbm        drive the network engine from a newline-delimited op script

Exit codes: 0 success, 2 configuration error, 3 runtime/simulation error.
"""
from __future__ import annotations

import functools
import json
import math
import sys

import click
import numpy as np

from . import ldbm as nets
from .circuits import build_qite_circuit
from .decomp import decompose_sites, mean_unit_success
from .ir import AncillaPolicy
from .pauli import (
    Hamiltonian,
    HamiltonianTerm,
    PauliString,
    apply_word,
    dense_matrix,
    parse_hamiltonian,
)
from .simulator import (
    StateVector,
    expectation,
    imaginary_time_oracle,
    n_trotter_steps,
    run_exact,
    run_shots,
)
from .stats import BatchSeries, jackknife

CSV_HEADER = (
    "tau,E_mean,E_err,ZZ_mean,ZZ_err,X_mean,X_err,"
    "acceptance,acceptance_model,effective_samples"
)

ISING_TEXT = """\
1 ZZI
1 IZZ
1 ZIZ
-1 XII
-1 IXI
-1 IIX
"""


def ising_hamiltonian() -> Hamiltonian:
    """3-qubit critical transverse-field Ising chain, periodic boundaries."""
    return parse_hamiltonian(ISING_TEXT)


def _g(x: float) -> str:
    return f"{x:.12g}"


def _runtime(f):
    """Convert uncaught runtime failures into exit code 3 (config errors are
    click.UsageError and keep click's exit code 2)."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (click.ClickException, click.exceptions.Abort, SystemExit):
            raise
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _load_hamiltonian(path: str) -> Hamiltonian:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise click.UsageError(f"cannot read hamiltonian file: {exc}")
    try:
        return parse_hamiltonian(text)
    except ValueError as exc:
        raise click.UsageError(f"invalid hamiltonian: {exc}")


def _parse_taus(spec: str, dtau: float) -> list[float]:
    try:
        taus = [float(part) for part in spec.split(",") if part.strip()]
    except ValueError:
        raise click.UsageError(f"--tau must be a comma-separated list, got {spec!r}")
    if not taus:
        raise click.UsageError("--tau is empty")
    for tau in taus:
        if tau < 0:
            raise click.UsageError(f"tau must be >= 0, got {tau}")
        try:
            n_trotter_steps(tau, dtau)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    return taus


def _initial_state(spec: str, n_qubits: int) -> StateVector:
    if spec == "plus":
        return StateVector.uniform_plus(n_qubits)
    if spec == "zero":
        return StateVector.zeros(n_qubits)
    if len(spec) == n_qubits and set(spec) <= {"0", "1"}:
        return StateVector.from_bitstring(spec)
    raise click.UsageError(
        f"--init must be 'plus', 'zero', or a {n_qubits}-bit string, got {spec!r}"
    )


def _ancilla_policy(spec: str) -> AncillaPolicy:
    try:
        return AncillaPolicy.parse(spec)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _measurement_groups(h: Hamiltonian) -> list[tuple[str, list[int]]]:
    """Greedy first-fit grouping of terms into joint measurement bases."""
    groups: list[tuple[list[str | None], list[int]]] = []
    for idx, term in enumerate(h.terms):
        word = term.string.word
        for basis, members in groups:
            if all(basis[q] in (None, word[q]) for q in term.string.support()):
                for q in term.string.support():
                    basis[q] = word[q]
                members.append(idx)
                break
        else:
            basis = [None] * h.n_qubits
            for q in term.string.support():
                basis[q] = word[q]
            groups.append((basis, [idx]))
    return [("".join(ch or "Z" for ch in basis), members) for basis, members in groups]


def _derive_seed(seed: int, stream: int) -> int:
    return (seed ^ (0x9E3779B97F4A7C15 * (stream + 1))) & ((1 << 64) - 1)


def _bare_expectation(state: StateVector, word: str) -> float:
    vec = state.amps
    return float(np.vdot(vec, apply_word(word, vec)).real)


def _column_terms(h: Hamiltonian) -> tuple[list[int], list[int]]:
    """Term indices feeding the ZZ (diagonal words) and X (X-only words)
    CSV columns; other words contribute to the energy only."""
    diag = [i for i, t in enumerate(h.terms)
            if t.string.support() and set(t.string.word) <= {"I", "Z"}]
    xonly = [i for i, t in enumerate(h.terms)
             if t.string.support() and set(t.string.word) <= {"I", "X"}]
    return diag, xonly


def iter_evolution(
    h: Hamiltonian,
    taus: list[float],
    dtau: float,
    order: int,
    route: str,
    policy: AncillaPolicy,
    psi0: StateVector,
    mode: str,
    shots: int,
    batches: int,
    seed: int,
    oracle_check: bool = False,
):
    """Yield one (row dict, note-or-None) per tau checkpoint.

    Shots mode runs one sampling pass per measurement-basis group (the shot
    budget is split evenly), then splits each pass into `batches` contiguous
    batches for jackknife errors; a batch contributes to an observable only
    when every basis group it needs has at least one accepted shot there.
    """
    diag_terms, x_terms = _column_terms(h)
    groups = _measurement_groups(h)
    for t_idx, tau in enumerate(taus):
        circuit = build_qite_circuit(h, tau, dtau, order, route=route, policy=policy)
        note = None
        if mode == "exact":
            result = run_exact(circuit, psi0)
            state = result.final_state
            e_mean = expectation(state, h)
            zz = sum(_bare_expectation(state, h.terms[i].string.word) for i in diag_terms)
            xx = sum(_bare_expectation(state, h.terms[i].string.word) for i in x_terms)
            row = {
                "tau": tau, "E_mean": e_mean, "E_err": 0.0,
                "ZZ_mean": zz, "ZZ_err": 0.0, "X_mean": xx, "X_err": 0.0,
                "acceptance": result.cumulative_success,
                "acceptance_model": circuit.model_success,
                "effective_samples": 0,
            }
            if oracle_check:
                e_oracle = expectation(imaginary_time_oracle(h, tau, psi0), h)
                note = (
                    f"tau {tau:g}: E {e_mean:.9f}, dense oracle {e_oracle:.9f}, "
                    f"|diff| {abs(e_mean - e_oracle):.3g}"
                )
            yield row, note
            continue

        n_groups = len(groups)
        if shots % (n_groups * batches) != 0:
            raise click.UsageError(
                f"--shots {shots} must divide evenly into {n_groups} basis "
                f"group(s) x {batches} batches"
            )
        per_group = shots // n_groups
        per_batch = per_group // batches
        counts = np.zeros((n_groups, batches), dtype=int)
        term_sums = {}
        for g_idx, (basis, members) in enumerate(groups):
            run = run_shots(
                circuit, psi0, per_group,
                _derive_seed(seed, n_groups * t_idx + g_idx),
                terminal_basis=basis,
            )
            acc = run.accepted.reshape(batches, per_batch)
            counts[g_idx] = acc.sum(axis=1)
            for i in members:
                support = list(h.terms[i].string.support())
                if support:
                    prods = np.prod(1.0 - 2.0 * run.terminal[:, support], axis=1)
                else:
                    prods = np.ones(run.n_shots)
                vals = np.where(run.accepted, prods, 0.0)
                term_sums[i] = vals.reshape(batches, per_batch).sum(axis=1)

        group_of = {i: g for g, (_, members) in enumerate(groups) for i in members}

        def column(indices, coeffs) -> tuple[float, float, np.ndarray]:
            if not indices:
                return 0.0, 0.0, np.ones(batches, dtype=bool)
            need = sorted({group_of[i] for i in indices})
            kept = np.all(counts[need] > 0, axis=0)
            if int(kept.sum()) < 2:
                raise RuntimeError(
                    f"only {int(kept.sum())} batch(es) have accepted shots in "
                    f"all required bases at tau={tau:g}; increase --shots"
                )
            vals = np.zeros(batches)
            for i, c in zip(indices, coeffs):
                vals = vals + c * term_sums[i] / np.maximum(counts[group_of[i]], 1)
            series = BatchSeries(
                values=vals[kept], batch_size=per_batch,
                accepted=counts[:, kept].sum(axis=0),
            )
            est = jackknife(series)
            return est.mean, est.std_error, kept

        all_idx = list(range(len(h.terms)))
        e_mean, e_err, _ = column(all_idx, [h.terms[i].coefficient for i in all_idx])
        zz_mean, zz_err, _ = column(diag_terms, [1.0] * len(diag_terms))
        x_mean, x_err, _ = column(x_terms, [1.0] * len(x_terms))
        total_accepted = int(counts.sum())
        row = {
            "tau": tau, "E_mean": e_mean, "E_err": e_err,
            "ZZ_mean": zz_mean, "ZZ_err": zz_err, "X_mean": x_mean, "X_err": x_err,
            "acceptance": total_accepted / (per_group * n_groups),
            "acceptance_model": circuit.model_success,
            "effective_samples": total_accepted,
        }
        yield row, note


def _format_row(row: dict) -> str:
    return ",".join([
        _g(row["tau"]), _g(row["E_mean"]), _g(row["E_err"]),
        _g(row["ZZ_mean"]), _g(row["ZZ_err"]), _g(row["X_mean"]), _g(row["X_err"]),
        _g(row["acceptance"]), _g(row["acceptance_model"]),
        str(int(row["effective_samples"])),
    ])


@click.group()
def main() -> None:
    """Imaginary-time evolution via post-selected block encodings."""


@main.command("decompose")
@click.argument("word")
@click.argument("k", type=float)
@click.option("--verify", is_flag=True, help="check the reconstruction identity densely")
@_runtime
def cmd_decompose(word: str, k: float, verify: bool) -> None:
    """Decompose exp(-K P) for the diagonal structure of WORD.

    Prints the hidden unit(s), induced couplings, and predicted success
    probabilities as JSON.  Only the support of WORD matters here; basis
    rotations are a circuit-level concern.
    """
    try:
        string = PauliString(word)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    support = string.support()
    if not support:
        raise click.UsageError(f"word {word!r} has empty support")
    if len(support) > 14:
        raise click.UsageError(f"support size {len(support)} exceeds the solver limit 14")
    dec = decompose_sites(support, k, string.n_qubits)
    payload = dec.to_json_dict()
    payload["mean_success_per_unit"] = [mean_unit_success(u) for u in dec.hidden_units]
    payload["mean_success_product"] = float(
        np.prod([mean_unit_success(u) for u in dec.hidden_units])
    ) if dec.hidden_units else 1.0
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if verify:
        m = len(support)
        pos = {q: i for i, q in enumerate(support)}
        spins = 1.0 - 2.0 * ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1)
        target_exp = k * np.prod(spins, axis=1)
        for t in dec.induced_terms:
            cols = [pos[q] for q in t.string.support()]
            target_exp = target_exp + t.coefficient * np.prod(spins[:, cols], axis=1)
        realized = np.full(1 << m, math.exp(dec.log_norm) if dec.hidden_units else 1.0)
        for u in dec.hidden_units:
            angle = u.bias + sum(w * spins[:, pos[q]] for q, w in u.weights)
            realized = realized * 2.0 * np.cos(angle)
        err = float(np.max(np.abs(realized - np.exp(-target_exp))))
        click.echo(f"verify: max entrywise error {err:.3e}", err=True)


_COMMON = [
    click.option("--dtau", type=float, default=0.01, show_default=True,
                 help="Trotter step"),
    click.option("--order", type=click.IntRange(1, 2), default=2, show_default=True,
                 help="Trotter order"),
    click.option("--route", type=click.Choice(["rbm", "cx"]), default="rbm",
                 show_default=True, help="encoding route"),
    click.option("--ancilla", default="single", show_default=True,
                 help="ancilla policy: single | pooled:N"),
    click.option("--shots", type=int, default=100_000, show_default=True),
    click.option("--batches", type=int, default=100, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--mode", type=click.Choice(["exact", "shots"]), default=None,
                 help="exact post-selection or sampled shots"),
    click.option("--out", default="-", show_default=True, help="CSV path or -"),
    click.option("--high-stats", is_flag=True,
                 help="use the full-scale shot budget (10^6)"),
]


def _with_common(f):
    for opt in reversed(_COMMON):
        f = opt(f)
    return f


def _write_rows(out: str, rows_iter) -> list[dict]:
    """Stream rows to the CSV sink, flushing per checkpoint; returns them."""
    rows = []
    sink = sys.stdout if out == "-" else open(out, "w", encoding="utf-8", newline="\n")
    try:
        sink.write(CSV_HEADER + "\n")
        sink.flush()
        for row, note in rows_iter:
            sink.write(_format_row(row) + "\n")
            sink.flush()
            if note:
                click.echo(note, err=True)
            rows.append(row)
    finally:
        if sink is not sys.stdout:
            sink.close()
    return rows


@main.command("evolve")
@click.option("--hamiltonian", required=True, help="Hamiltonian file path or -")
@click.option("--tau", default="1.0", show_default=True,
              help="comma-separated checkpoint times")
@click.option("--init", "init_spec", default="plus", show_default=True,
              help="initial state: plus | zero | bitstring")
@_with_common
@_runtime
def cmd_evolve(hamiltonian, tau, init_spec, dtau, order, route, ancilla,
               shots, batches, seed, mode, out, high_stats) -> None:
    """Evolve an initial state in imaginary time, one CSV row per checkpoint."""
    h = _load_hamiltonian(hamiltonian)
    if dtau <= 0:
        raise click.UsageError(f"--dtau must be positive, got {dtau}")
    taus = _parse_taus(tau, dtau)
    psi0 = _initial_state(init_spec, h.n_qubits)
    policy = _ancilla_policy(ancilla)
    mode = mode or "exact"
    if high_stats:
        shots = 1_000_000
    if batches < 2:
        raise click.UsageError(f"--batches must be >= 2, got {batches}")
    rows_iter = iter_evolution(
        h, taus, dtau, order, route, policy, psi0, mode, shots, batches, seed,
        oracle_check=(mode == "exact" and h.n_qubits <= 12),
    )
    _write_rows(out, rows_iter)


@main.command("ising-demo")
@_with_common
@_runtime
def cmd_ising_demo(dtau, order, route, ancilla, shots, batches, seed, mode,
                   out, high_stats) -> None:
    """Run the 3-qubit critical transverse-field Ising benchmark.

    Periodic chain, |+++> start, tau from 0.1 to 1.0; writes the CSV to
    --out (default ising_demo.csv) and a JSON summary to stdout, including
    the dense-oracle energies and the per-step success-probability model.
    """
    h = ising_hamiltonian()
    if dtau <= 0:
        raise click.UsageError(f"--dtau must be positive, got {dtau}")
    mode = mode or "shots"
    if high_stats:
        shots = 1_000_000
    if batches < 2:
        raise click.UsageError(f"--batches must be >= 2, got {batches}")
    if out == "-":
        out = "ising_demo.csv"
    taus = [round(0.1 * i, 10) for i in range(1, 11)]
    for t in taus:
        try:
            n_trotter_steps(t, dtau)
        except ValueError as exc:
            raise click.UsageError(str(exc))
    psi0 = StateVector.uniform_plus(3)
    policy = _ancilla_policy(ancilla)
    rows = _write_rows(out, iter_evolution(
        h, taus, dtau, order, route, policy, psi0, mode, shots, batches, seed,
    ))
    evals = np.linalg.eigvalsh(dense_matrix(h))
    oracle = {
        _g(t): expectation(imaginary_time_oracle(h, t, psi0), h) for t in taus
    }
    summary = {
        "hamiltonian": "3-qubit critical transverse-field Ising chain (PBC)",
        "dtau": dtau, "order": order, "route": route, "mode": mode,
        "shots": shots, "batches": batches, "seed": seed,
        "ground_energy": float(evals[0]),
        "oracle_energy": oracle,
        "csv": out,
        "final_acceptance": rows[-1]["acceptance"],
        "final_acceptance_model": rows[-1]["acceptance_model"],
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command("ldbm")
@click.argument("script")
@click.option("--qubits", type=int, default=1, show_default=True)
@_runtime
def cmd_ldbm(script: str, qubits: int) -> None:
    """Execute a network op script against a fresh |0...0> network.

    Ops (one per line, # comments allowed): hx L | hy L | hydag L |
    rz L PHI | rzz L1 L2 PHI | imag WORD K | to-dbm | dump.
    Prints the final statevector and unit counts.
    """
    if qubits < 1:
        raise click.UsageError(f"--qubits must be >= 1, got {qubits}")
    try:
        text = sys.stdin.read() if script == "-" else open(script, encoding="utf-8").read()
    except OSError as exc:
        raise click.UsageError(f"cannot read script: {exc}")
    net = nets.zero_state(qubits)
    dbm = None

    def _index(token: str, lineno: int) -> int:
        try:
            value = int(token)
        except ValueError:
            raise click.UsageError(f"line {lineno}: expected qubit index, got {token!r}")
        if not 0 <= value < qubits:
            raise click.UsageError(f"line {lineno}: qubit index {value} out of range")
        return value

    def _angle(token: str, lineno: int) -> float:
        try:
            return float(token)
        except ValueError:
            raise click.UsageError(f"line {lineno}: expected number, got {token!r}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        op, args = tokens[0].lower(), tokens[1:]
        if dbm is not None and op != "dump":
            raise click.UsageError(
                f"line {lineno}: no further ops after to-dbm (got {op!r})"
            )
        if op in ("hx", "hy", "hydag") and len(args) == 1:
            fn = {"hx": nets.apply_hx, "hy": nets.apply_hy,
                  "hydag": nets.apply_hy_dag}[op]
            net = fn(net, _index(args[0], lineno))
        elif op == "rz" and len(args) == 2:
            net = nets.apply_rz(net, _index(args[0], lineno), _angle(args[1], lineno))
        elif op == "rzz" and len(args) == 3:
            net = nets.apply_rzz(net, _index(args[0], lineno),
                                 _index(args[1], lineno), _angle(args[2], lineno))
        elif op == "imag" and len(args) == 2:
            word = args[0].upper()
            if len(word) != qubits:
                raise click.UsageError(
                    f"line {lineno}: word {word!r} does not match --qubits {qubits}"
                )
            try:
                term = HamiltonianTerm(_angle(args[1], lineno), PauliString(word))
            except ValueError as exc:
                raise click.UsageError(f"line {lineno}: {exc}")
            net = nets.apply_term_imaginary(net, term, 1.0)
        elif op == "to-dbm" and not args:
            dbm = nets.ldbm_to_dbm(net)
        elif op == "dump" and not args:
            obj = dbm.to_json_dict() if dbm is not None else net.to_json_dict()
            click.echo(json.dumps(obj))
        else:
            raise click.UsageError(f"line {lineno}: unknown op {line!r}")

    final = dbm.to_ldbm() if dbm is not None else net
    state = nets.statevector(final)
    norm = nets.statevector_norm(final)
    for idx, amp in enumerate(state.amps):
        bits = format(idx, f"0{qubits}b")
        click.echo(f"|{bits}>  {amp.real:+.10f}{amp.imag:+.10f}j")
    if dbm is not None:
        click.echo(f"hidden units: {dbm.n_hidden}  deep units: {dbm.n_deep}")
    else:
        click.echo(f"hidden units: {net.n_hidden}")
    click.echo(f"norm: {norm:.12g}")


if __name__ == "__main__":
    main()
