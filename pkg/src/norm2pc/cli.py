"""Command-line runner: ``run``, ``bench``, ``verify`` and ``setup-baseot``.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 transport or protocol failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import cost, protocols
from .errors import Norm2pcError, ProtocolError, TransportError, UsageError
from .norms import CIFAR_LAYERS
from .ot import BACKENDS, BaseOtSetup, DealerBackend, DiffieHellmanBaseOt, IknpBackend
from .packing import pack_bits, pack_uint, unpack_bits, unpack_uint
from .ring import SUPPORTED_BITS
from .session import Session, local_sessions, run_pair
from .transport import TcpChannel, Transport

log = logging.getLogger("norm2pc")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_TRANSPORT = 0, 1, 2, 3


class ConfigMismatch(UsageError):
    pass


# --- inputs -------------------------------------------------------------


def read_vectors(path, bits: int) -> list[list[int]]:
    """CSV with one integer vector per record; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            fields = [f.strip() for f in rec if f.strip() != ""]
            if not fields:
                continue
            try:
                vals = [int(f) for f in fields]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise UsageError(f"{path}:{lineno}: non-integer field") from None
            lo, hi = -(1 << (bits - 1)), 1 << (bits - 1)
            for v in vals:
                if not lo <= v < hi:
                    raise UsageError(f"{path}:{lineno}: {v} does not fit signed {bits} bits")
            rows.append(vals)
    if not rows:
        raise UsageError(f"{path}: no vectors found")
    return rows


def _prepare(name: str, values, bits: int) -> np.ndarray:
    v = np.asarray([int(t) for t in values], dtype=object)
    if protocols.get(name).unsigned:
        v = np.asarray([int(t) % (1 << bits) for t in v], dtype=object)
    protocols.check_range(name, v, bits)
    return v


def config_hash(args, n: int) -> str:
    fields = {
        "protocol": args.protocol,
        "bits": args.bits,
        "n": n,
        "dim": args.dim,
        "radix": args.radix,
        "backend": args.backend,
        "dealer_seed": args.seed if args.backend == "dealer" else None,
    }
    return hashlib.sha256(json.dumps(fields, sort_keys=True).encode()).hexdigest()


# --- run ----------------------------------------------------------------


def _reveal(session, out, name: str, bits: int):
    with session.scope("output"):
        if protocols.get(name).output == "bit":
            peer = unpack_bits(session.exchange(pack_bits(out.bit)), len(out))
            return [int(v) for v in (out.bit ^ peer)]
        peer = unpack_uint(session.exchange(pack_uint(out.value, bits)), len(out), bits)
        return [int(v) for v in (out.value + peer.astype(out.value.dtype))]


def _signed_out(vals, name, bits):
    if protocols.get(name).output == "bit":
        return vals
    return [v - (1 << bits) if v >> (bits - 1) else v for v in vals]


def _party_program(args, n, dim):
    def program(session, own):
        with session.scope("handshake"):
            mine = config_hash(args, n)
            peer = session.exchange(mine.encode()).decode(errors="replace")
            if peer != mine:
                raise ConfigMismatch(
                    f"peer configuration differs (hash {peer[:12]} vs ours {mine[:12]}); "
                    "protocol, bits, n, dim, radix, backend and dealer seed must agree"
                )
        session.backend.setup(session)
        t0 = time.perf_counter()
        out = protocols.evaluate(session, args.protocol, own, n, dim)
        session.flush()
        wall = (time.perf_counter() - t0) * 1e3
        revealed = _reveal(session, out, args.protocol, args.bits) if args.reveal else None
        return out, revealed, wall

    return program


def _make_backend(args, party: int):
    if args.backend == "dealer":
        return DealerBackend(seed=args.seed)
    setup = None
    if getattr(args, "baseot", None):
        path = Path(args.baseot)
        if path.is_dir():
            path = path / f"baseot_p{party}.bin"
        elif args.local:
            raise UsageError("--local needs --baseot to name the directory holding both party files")
        setup = BaseOtSetup.load(path)
    if setup is None and args.local:
        setup = BaseOtSetup.generate_pair(args.seed)[party]
    return IknpBackend(setup=setup, provider=None if setup else DiffieHellmanBaseOt())


def _vector_inputs(args):
    """Returns (a, b) for local runs, (own, None) for party runs."""
    if args.input:
        rows = read_vectors(args.input, args.bits)
        if args.local:
            if len(rows) < 2:
                raise UsageError("local mode needs two vectors in the input file (x then y)")
            a, b = rows[0], rows[1]
        else:
            a, b = rows[0], None
    else:
        n = args.dim or 16
        rng = np.random.default_rng([args.seed, 0x1D])
        a, b = protocols.sample_inputs(args.protocol, n, args.bits, rng)
        if not args.local:
            a = (a, b)[args.party]
            b = None
    if b is not None and len(a) != len(b):
        raise UsageError(f"vector lengths differ: {len(a)} vs {len(b)}")
    return a, b


def _exchange_metrics(session) -> dict:
    with session.scope("report"):
        peer = session.exchange(json.dumps(session.metrics.snapshot()).encode())
    return json.loads(peer)


def cmd_run(args) -> int:
    if not args.local and (args.party is None or not (args.listen or args.connect)):
        raise UsageError("party mode needs --party and --listen or --connect (or use --local)")
    a, b = _vector_inputs(args)
    n = len(a)
    p = protocols.get(args.protocol)
    dim = args.dim if (p.grouped and args.dim and args.input) else None
    if dim and n % dim:
        raise UsageError(f"n={n} is not a multiple of --dim {dim}")
    params = cost.CostModelParams(ell=args.bits, m_radix=args.radix)
    program = _party_program(args, n, dim)
    if args.local:
        args.reveal = True
        sessions = local_sessions(
            [_make_backend(args, 0), _make_backend(args, 1)], seed=args.seed, bits=args.bits, m_radix=args.radix
        )
        try:
            (o0, rev, wall), _ = run_pair(
                program, sessions, (_prepare(args.protocol, a, args.bits), _prepare(args.protocol, b, args.bits))
            )
        finally:
            for s in sessions:
                s.close()
        rep = cost.report_from_sessions(args.protocol, sessions, params, n, dim, wall)
    else:
        host, _, port = (args.listen or args.connect).rpartition(":")
        try:
            port = int(port)
        except ValueError:
            raise UsageError(f"bad endpoint {(args.listen or args.connect)!r}; use HOST:PORT") from None
        ch = TcpChannel.listen(host or "127.0.0.1", port) if args.listen else TcpChannel.connect(host or "127.0.0.1", port)
        sess = Session(args.party, Transport(ch, args.party), _make_backend(args, args.party), seed=args.seed, m_radix=args.radix, bits=args.bits)
        try:
            own, rev, wall = program(sess, _prepare(args.protocol, a, args.bits))
            peer_metrics = _exchange_metrics(sess)
        finally:
            sess.close()
        rep = _report_party(args.protocol, sess, peer_metrics, params, n, dim, wall)
        if not args.reveal:
            share = own.bit if p.output == "bit" else own.value
            print(json.dumps({"party": args.party, "output_share": [int(v) for v in share]}))
    if rev is not None:
        rep.output = _signed_out(rev, args.protocol, args.bits)
        print(json.dumps({"protocol": args.protocol, "output": rep.output}))
    _write_report(args.report, rep.to_dict())
    return EXIT_OK if all(c["ok"] for c in rep.bound_checks) else EXIT_VERIFY


def _report_party(protocol, sess, peer, params, n, dim, wall) -> cost.CostReport:
    me = sess.metrics.tag(protocol)
    other = peer["per_tag"].get(protocol, {"schedule_bits": 0, "rounds": 0, "bytes_sent": 0})
    bits = {sess.party: me.schedule_bits, 1 - sess.party: other["schedule_bits"]}
    wire = {sess.party: me.bytes_sent, 1 - sess.party: other["bytes_sent"]}
    be = sess.backend
    rep = cost.CostReport(
        protocol=protocol,
        params={"lambda": params.lam, "ell": params.ell, "n": n, "m_radix": params.m_radix, "dim": dim or n},
        analytic_bits=cost.analytic_bound(protocol, params, n, dim),
        measured_bits={"p0": bits[0], "p1": bits[1], "total": bits[0] + bits[1]},
        rounds=max(me.rounds, other["rounds"]),
        wall_ms=wall,
        backend=be.mode,
        label="emulated OT-extension schedule (dealer)" if be.emulated else f"measured {be.mode} messages",
        wire_bytes={"p0": wire[0], "p1": wire[1]},
        transcript_sha256=[sess.metrics.transcript_sha256, peer["transcript_sha256"]][:: 1 if sess.party == 0 else -1],
    )
    rep.bound_checks = cost.assert_bounds(rep)
    return rep


def _write_report(path, obj):
    if path:
        Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# --- verify -------------------------------------------------------------


def _edge_inputs(name: str, bits: int):
    lo, hi = protocols.input_range(name, bits)
    if protocols.get(name).unsigned:
        return [0, 0, hi - 1, hi - 1, 1], [0, hi - 1, 0, hi - 1, 0]
    # includes the most negative value, whose |.| wraps back onto itself
    return [lo, lo, hi - 1, 0, -1, lo], [0, hi - 1, lo, 0, 0, lo]


def verify_protocol(name: str, bits: int, trials: int, backend: str = "dealer", seed: int = 0, corrupt_cot: int | None = None, dim: int = 8):
    """Returns (ok, checked, counterexample or None)."""
    p = protocols.get(name)
    rng = np.random.default_rng([seed, bits, 0xF1])
    if name == "mill" and bits == 8:
        a = np.repeat(np.arange(256), 256).astype(object)
        b = np.tile(np.arange(256), 256).astype(object)
        gdim = None
    else:
        gdim = dim if p.grouped else None
        count = trials * gdim if gdim else trials
        a, b = protocols.sample_inputs(name, count, bits, rng)
        if not p.grouped:
            ea, eb = _edge_inputs(name, bits)
            a = np.concatenate([np.asarray(ea, dtype=object), a])
            b = np.concatenate([np.asarray(eb, dtype=object), b])
    n = len(a)
    sessions = local_sessions(backend, seed=seed, bits=bits)
    if corrupt_cot is not None:
        sessions[0].backend.corrupt_cot = corrupt_cot
    try:
        r0, r1 = run_pair(lambda s, v: protocols.evaluate(s, name, v, n, gdim), sessions, (a, b))
    finally:
        for s in sessions:
            s.close()
    got = protocols.output_values(r0, r1, name, bits)
    exp = protocols.oracle(name, a, b, bits, gdim)
    bad = [i for i, (g, e) in enumerate(zip(got, exp)) if g != e]
    if not bad:
        return True, len(exp), None
    i = bad[0]
    sl = slice(i * gdim, (i + 1) * gdim) if gdim else slice(i, i + 1)
    share = (lambda r: [int(v) for v in (r.bit if p.output == "bit" else r.value)][i])
    cex = {
        "protocol": name,
        "bits": bits,
        "seed": seed,
        "index": i,
        "x": [int(v) for v in a[sl]],
        "y": [int(v) for v in b[sl]],
        "expected": exp[i],
        "got": got[i],
        "output_shares": [share(r0), share(r1)],
        "mismatches": len(bad),
    }
    return False, len(exp), cex


def cmd_verify(args) -> int:
    names = protocols.PROTOCOL_NAMES if args.protocol in (None, "all") else [args.protocol]
    bit_set = args.bits_list or [8, 16, 32]
    failures = 0
    summary = []
    for name in names:
        for bits in bit_set:
            t0 = time.perf_counter()
            ok, checked, cex = verify_protocol(
                name, bits, args.trials, args.backend, args.seed, args.inject_fault, args.dim or 8
            )
            dt = time.perf_counter() - t0
            status = "PASS" if ok else "FAIL"
            print(f"{status} {name:<9} l={bits:<2} {checked} checked  {dt:.2f}s")
            summary.append({"protocol": name, "bits": bits, "checked": checked, "ok": ok, "counterexample": cex})
            if not ok:
                failures += 1
                print("  counterexample: " + json.dumps(cex))
    _write_report(args.report, summary)
    return EXIT_OK if failures == 0 else EXIT_VERIFY


# --- bench --------------------------------------------------------------


def _window(value, ref, lo, hi):
    r = value / ref
    return r, lo <= r <= hi


def bench_headline(args):
    P = cost.CostModelParams(ell=32, m_radix=args.radix)
    n = args.n or 2**16
    rows = []
    reports = []
    for proto, blocks in (("abs_mux", ()), ("l1", ("msb",)), ("l2sq", ("mult",)), ("linf", ("max",))):
        rep = cost.measure(proto, n, P, backend=args.backend, seed=args.seed)
        reports.append(rep.to_dict())
        figures = [(proto, rep.measured_mb)] + [(b, rep.block_mb(b)) for b in blocks]
        for label, mb in figures:
            key = "mult" if label in ("mult", "l2sq") else label
            ref = cost.HEADLINE_REFERENCE_MB.get(key)
            lo, hi = cost.HEADLINE_WINDOW.get(key, (1.0, 1.0))
            ratio, ok = _window(mb, ref, lo, hi) if (ref and n == 2**16) else (None, None)
            if key == "abs_mux" and n == 2**16:
                ok = rep.measured_total * 2**16 // n == 320 * 2**16
            rows.append({"row": label, "n": n, "mb": round(mb, 4), "reference_mb": ref, "ratio": ratio and round(ratio, 3), "ok": ok})
    return rows, reports


def bench_conv_adder(args):
    P = cost.CostModelParams(ell=32, m_radix=args.radix)
    sweep = args.sweep or [2**k for k in range(6, 17)]
    rows, reports = [], []
    for n in sweep:
        if args.measure:
            conv = cost.measure("mult", n, P, backend=args.backend, seed=args.seed)
            add = cost.measure("adder", n, P, backend=args.backend, seed=args.seed)
            reports += [conv.to_dict(), add.to_dict()]
            cmb, amb = conv.measured_mb, add.measured_mb
        else:
            cmb, amb = cost.predict_table("conv", P, n), cost.predict_table("adder", P, n)
        ref = cost.CONV_ADDER_REFERENCE_MB.get(n)
        rows.append({"n": n, "conv_mb": round(cmb, 4), "adder_mb": round(amb, 4), "ratio": round(cmb / amb, 3),
                     "reference_mb": ref, "ok": amb < cmb})  # fmt: skip
    return rows, reports


def bench_max_depth(args):
    from .blocks import max_sequential

    P = cost.CostModelParams(ell=32, m_radix=args.radix)
    sweep = args.sweep or [1, 2, 3, 4, 8, 16, 32, 100, 256, 1024]
    rows, reports = [], []
    for n in sweep:
        rep = cost.measure("max", n, P, backend=args.backend, seed=args.seed)
        reports.append(rep.to_dict())
        seq_rounds = None
        if n <= args.naive_limit:
            a, b = protocols.sample_inputs("max", n, 32, np.random.default_rng(args.seed))
            sessions = local_sessions(args.backend, seed=args.seed, bits=32)

            def prog(s, v):
                from .norms import input_share

                x = input_share(s, v if s.party == 0 else None, 0, n=n)
                y = input_share(s, v if s.party == 1 else None, 1, n=n)
                return max_sequential(s, x - y)

            try:
                run_pair(prog, sessions, (a, b))
            finally:
                for s in sessions:
                    s.close()
            seq_rounds = sessions[0].metrics.tag("max_sequential").rounds
        levels = rep.rounds // cost.rounds_per_level(P)
        rows.append({"n": n, "tree_rounds": rep.rounds, "tree_levels": levels, "sequential_rounds": seq_rounds,
                     "mb": round(rep.measured_mb, 4)})  # fmt: skip
    return rows, reports


def bench_layers(args):
    P = cost.CostModelParams(ell=32, m_radix=args.radix)
    rows, reports = [], []
    for spec, ref in zip(CIFAR_LAYERS, cost.LAYER_REFERENCE_MB):
        k = spec.elementwise_ops
        cmb, amb = cost.predict_table("conv", P, k), cost.predict_table("adder", P, k)
        rows.append({"layer": f"{spec.h_in}x{spec.w_in}x{spec.c_in} k{spec.d}x{spec.d}x{spec.c_out} s{spec.stride} p{spec.padding}",
                     "ops": k, "conv_mb": round(cmb, 1), "adder_mb": round(amb, 1), "reference_mb": ref,
                     "ratio": round(cmb / amb, 3)})  # fmt: skip
    return rows, reports


BENCHES = {"headline": bench_headline, "conv-adder": bench_conv_adder, "max-depth": bench_max_depth, "layers": bench_layers}


def cmd_bench(args) -> int:
    rows, reports = BENCHES[args.suite](args)
    for r in rows:
        print(json.dumps(r))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: json.dumps(v) if isinstance(v, (list, tuple)) else v for k, v in r.items()})
    _write_report(args.report, {"suite": args.suite, "rows": rows, "reports": reports})
    return EXIT_OK if all(r.get("ok") in (True, None) for r in rows) else EXIT_VERIFY


# --- setup-baseot ----------------------------------------------------------


def cmd_setup(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.local:
        for p, st in enumerate(BaseOtSetup.generate_pair(args.seed)):
            st.save(out / f"baseot_p{p}.bin")
            print(f"wrote {out / f'baseot_p{p}.bin'} (trusted local setup)")
        return EXIT_OK
    if args.party is None or not (args.listen or args.connect):
        raise UsageError("setup-baseot needs --local, or --party with --listen/--connect")
    host, _, port = (args.listen or args.connect).rpartition(":")
    ch = TcpChannel.listen(host or "127.0.0.1", int(port)) if args.listen else TcpChannel.connect(host or "127.0.0.1", int(port))
    sess = Session(args.party, Transport(ch, args.party), DealerBackend(seed=0))
    try:
        st = DiffieHellmanBaseOt().run(sess)
    finally:
        sess.close()
    st.save(out / f"baseot_p{args.party}.bin")
    print(f"wrote {out / f'baseot_p{args.party}.bin'} ({sess.metrics.tag('setup').bytes_sent} bytes sent)")
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(eval_pow(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def eval_pow(tok: str) -> int:
    """Integer or 2^k shorthand."""
    tok = tok.strip()
    if tok.startswith("2^"):
        return 2 ** int(tok[2:])
    return int(tok)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="norm2pc", description="Semi-honest two-party secure distance computation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, protocol=True):
        if protocol:
            p.add_argument("--protocol", choices=list(protocols.PROTOCOL_NAMES) + (["all"] if p.prog.endswith("verify") else []), default=None)
        p.add_argument("--bits", type=int, default=32, choices=SUPPORTED_BITS)
        p.add_argument("--radix", type=int, default=4, help="Millionaires' chunk width m")
        p.add_argument("--backend", choices=BACKENDS, default="dealer")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--report", help="write a JSON report here")

    def endpoint(p):
        p.add_argument("--party", type=int, choices=(0, 1))
        g = p.add_mutually_exclusive_group()
        g.add_argument("--listen", metavar="HOST:PORT")
        g.add_argument("--connect", metavar="HOST:PORT")
        g.add_argument("--local", action="store_true", help="run both parties in this process")

    r = sub.add_parser("run", help="run one protocol end to end")
    common(r)
    endpoint(r)
    r.add_argument("--dim", type=int, help="vector length for random inputs, or group size for norms")
    r.add_argument("--input", help="CSV: own vector (party mode) or x and y records (local mode)")
    r.add_argument("--reveal", action="store_true", help="open the output to both parties")
    r.add_argument("--baseot", help="base-OT setup file, or a directory of baseot_p{0,1}.bin, for iknp")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="compare protocols with plaintext oracles in-process")
    common(v)
    v.add_argument("--bits-list", type=_int_list, help="comma-separated ring widths (default 8,16,32)")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--dim", type=int, help="group size for max/min and the norms (default 8)")
    v.add_argument("--inject-fault", type=int, metavar="K", help="corrupt the K-th COT reply (negative test)")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="communication benchmarks")
    common(b, protocol=False)
    b.add_argument("--suite", choices=sorted(BENCHES), required=True)
    b.add_argument("--n", type=eval_pow, help="batch size for headline (default 2^16)")
    b.add_argument("--sweep", type=_int_list, help="comma-separated n values, e.g. 2^8,2^14")
    b.add_argument("--measure", action="store_true", help="conv-adder: run protocols instead of the schedule model")
    b.add_argument("--naive-limit", type=int, default=256, help="max-depth: largest n for the sequential baseline")
    b.add_argument("--csv", help="also write rows as CSV")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("setup-baseot", help="create base-OT files for the iknp backend")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--seed", type=int, default=None, help="seed for --local generation")
    endpoint(s)
    s.set_defaults(func=cmd_setup)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.cmd == "run" and args.protocol is None:
            raise UsageError("run needs --protocol")
        return args.func(args)
    except ConfigMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Norm2pcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
