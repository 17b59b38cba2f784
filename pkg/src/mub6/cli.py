"""Command-line driver: set generation, enumeration, stage 2, verification, sharding.

Exit codes: 0 success, 1 usage error, 2 input corruption, 3 parameter
mismatch, 4 budget exhausted with unresolved results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .certify import descend, descend_many
from .core import NBINS, DiscMat, DiscParams, DiscVec, FeasKind, is_canonical
from .hadsearch import (
    KIND_HAD,
    KIND_PREHAD,
    MAT_HEADER,
    MAT_MAGIC,
    MAT_RECORD,
    ConfigurationError,
    MatrixStreamWriter,
    PrehadSearch,
    PruneConfig,
    StreamHeader,
    prune_batch,
    read_matrix_stream,
    read_stream_header,
)
from .oracle import Feasibility
from .sets import HEADER, MAGIC, RECORD_BYTES, SetBundle, SetFormatError, SetKind, VectorSet
from .stage2 import (
    CRT_MAGIC,
    DEFAULT_BUDGET_S,
    IntegrityError,
    Stage2Sets,
    Verdict,
    certs_from_bytes,
    process_a,
    read_certificates,
    recheck_certificate,
    record_offsets,
    write_certificates,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CORRUPT = 2
EXIT_MISMATCH = 3
EXIT_UNRESOLVED = 4

DEFAULT_CHECKPOINT_S = 60.0
SPOT_CHECKS = 2000


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# manifests and checkpoints


@dataclass
class RunManifest:
    n: int
    depth: int = 8
    shard_index: int = 0
    shard_total: int = 1
    sets_dir: str = "sets"
    input: str | None = None
    output: str | None = None
    budget_s: float = DEFAULT_BUDGET_S
    checkpoint_s: float = DEFAULT_CHECKPOINT_S

    @property
    def params(self) -> DiscParams:
        return DiscParams(self.n, self.depth)

    def save(self, path: Path) -> None:
        _atomic_write_text(Path(path), json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text())
            return cls(**data)
        except (OSError, ValueError, TypeError) as exc:
            raise CliError(f"cannot read manifest {path}: {exc}", EXIT_USAGE) from None

    def validate(self, kinds: tuple[SetKind, ...]) -> None:
        """Referenced set files exist and carry this manifest's (n, depth)."""
        for k in kinds:
            _load_set(Path(self.sets_dir), self.params, k)
        if self.input is not None:
            head = _input_header(Path(self.input))
            if (head.n, head.depth) != (self.n, self.depth):
                raise CliError(f"{self.input} is for n={head.n}, depth={head.depth}", EXIT_MISMATCH)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _input_header(path: Path) -> StreamHeader:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_USAGE) from None
    try:
        return read_stream_header(data)
    except SetFormatError as exc:
        raise CliError(f"{path}: {exc} at byte {exc.offset}", EXIT_CORRUPT) from None


def _load_set(directory: Path, params: DiscParams, kind: SetKind) -> VectorSet:
    path = SetBundle(params, directory).path(kind)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise CliError(f"missing set file {path}", EXIT_USAGE) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_USAGE) from None
    try:
        s = VectorSet.from_bytes(data)
    except SetFormatError as exc:
        raise CliError(f"{path}: {exc} at byte {exc.offset}", EXIT_CORRUPT) from None
    if (s.kind, s.n, s.depth) != (kind, params.n, params.depth):
        raise CliError(
            f"{path} holds {s.kind.name} n={s.n} depth={s.depth}, expected {kind.name} {params}", EXIT_MISMATCH
        )
    return s


def _parse_shard(text: str) -> tuple[int, int]:
    try:
        i, total = (int(x) for x in text.split("/"))
    except ValueError:
        raise CliError(f"--shard expects i/m, got {text!r}", EXIT_USAGE) from None
    if total < 1 or not 0 <= i < total:
        raise CliError(f"shard {i}/{total} out of range", EXIT_USAGE)
    return i, total


def _params(n: int, depth: int) -> DiscParams:
    try:
        return DiscParams(n, depth)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# gen-sets


def cmd_gen_sets(args) -> int:
    params = _params(args.n, args.depth)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc}", EXIT_USAGE) from None
    bundle = SetBundle(params, None, workers=args.threads)
    for name in args.kinds.split(","):
        try:
            feas = FeasKind.parse(name)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
        for kind in SetKind.family(feas):
            t0 = time.perf_counter()
            s = bundle.get(kind)
            path = out / f"{kind.stem}_n{params.n}_d{params.depth}.mub6set"
            try:
                s.write(path, digest=args.digest)
            except OSError as exc:
                raise CliError(f"cannot write {path}: {exc}", EXIT_USAGE) from None
            print(f"{kind.name:8s} n={params.n} depth={params.depth} size={len(s)} "
                  f"time={time.perf_counter() - t0:.1f}s -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# enumerate


def cmd_enumerate(args) -> int:
    if args.manifest:
        m = RunManifest.load(Path(args.manifest))
        n, depth, shard = m.n, m.depth, (m.shard_index, m.shard_total)
        sets_dir, out = Path(m.sets_dir), Path(args.out or m.output)
        interval = m.checkpoint_s
    else:
        if args.n is None or args.out is None:
            raise CliError("enumerate needs --n and --out (or --manifest)", EXIT_USAGE)
        n, depth = args.n, args.depth
        shard = _parse_shard(args.shard) if args.shard else (0, 1)
        sets_dir, out = Path(args.sets), Path(args.out)
        interval = args.checkpoint_interval
    params = _params(n, depth)
    ort = _load_set(sets_dir, params, SetKind.ORT)
    mon = _load_set(sets_dir, params, SetKind.ORT_MON)
    eps = _load_set(sets_dir, params, SetKind.ORT_EPS)
    search = PrehadSearch(params, ort, mon, eps, shard)
    config = PruneConfig(args.refine_depth)
    kind = KIND_HAD if args.prune else KIND_PREHAD
    header = StreamHeader(kind, params.n, params.depth, shard[0], shard[1], 0)
    ckpt_path = Path(args.checkpoint) if args.checkpoint else out.with_name(out.name + ".ckpt")

    written = 0
    if args.resume and ckpt_path.exists():
        ck = json.loads(ckpt_path.read_text())
        expect = {"n": params.n, "depth": params.depth, "shard": list(shard), "kind": kind}
        got = {k: ck.get(k) for k in expect}
        if got != expect:
            raise CliError(f"checkpoint {ckpt_path} is for {got}, not {expect}", EXIT_MISMATCH)
        search.restore(ck["search"])
        written = int(ck["written"])
        writer = MatrixStreamWriter(out, header, resume_count=written)
        if ck.get("done"):
            writer.close()
            print(f"shard {shard[0]}/{shard[1]} already complete: {written} matrices")
            return EXIT_OK
    else:
        writer = MatrixStreamWriter(out, header)

    def checkpoint(done: bool) -> None:
        writer.flush()
        state = {
            "n": params.n, "depth": params.depth, "shard": list(shard), "kind": kind,
            "written": written, "done": done, "search": search.snapshot(),
            "wall_clock": time.time(),
        }
        _atomic_write_text(ckpt_path, json.dumps(state) + "\n")

    last = time.monotonic()
    limit = args.limit
    stopped = False
    while limit is None or written < limit:
        cap = args.batch if (limit is None or args.prune) else min(args.batch, limit - written)
        batch = search.next_batch(cap)
        if batch.shape[0] == 0:
            break
        if args.prune:
            batch = batch[prune_batch(batch.astype(np.int64), config, params, args.prune_nodes)]
        if limit is not None and written + batch.shape[0] > limit:
            batch = batch[: limit - written]
        writer.write(batch)
        written += batch.shape[0]
        if interval >= 0 and time.monotonic() - last >= interval:
            checkpoint(False)
            last = time.monotonic()
        if args.stop_after is not None and written >= args.stop_after:
            stopped = True
            break
    finished = search.finished and not stopped
    checkpoint(finished or (limit is not None and written >= limit))
    writer.close()
    label = "HAD" if args.prune else "PREHAD"
    status = "complete" if finished else "stopped"
    print(f"{label} shard {shard[0]}/{shard[1]} n={params.n}: {written} matrices ({status}) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stage2

_WORKER_SETS: Stage2Sets | None = None


def _stage2_init(sets_dir: str, n: int, depth: int) -> None:
    global _WORKER_SETS
    params = DiscParams(n, depth)
    _WORKER_SETS = Stage2Sets(
        _load_set(Path(sets_dir), params, SetKind.UB),
        _load_set(Path(sets_dir), params, SetKind.UB_EPS),
        _load_set(Path(sets_dir), params, SetKind.ORT_EPS),
    )


def _stage2_one(args):
    core, budget, record_elapsed = args
    return process_a(DiscMat.from_core(core), _WORKER_SETS, budget, record_elapsed=record_elapsed)


def cmd_stage2(args) -> int:
    if args.manifest:
        m = RunManifest.load(Path(args.manifest))
        inp, sets_dir = Path(args.input or m.input), Path(m.sets_dir)
        out, budget = Path(args.out or m.output), m.budget_s
    else:
        if args.input is None or args.out is None:
            raise CliError("stage2 needs --input and --out (or --manifest)", EXIT_USAGE)
        inp, sets_dir, out, budget = Path(args.input), Path(args.sets), Path(args.out), args.budget
    head = _input_header(inp)
    try:
        _, cores = read_matrix_stream(inp)
    except SetFormatError as exc:
        raise CliError(f"{inp}: {exc} at byte {exc.offset}", EXIT_CORRUPT) from None
    params = _params(head.n, head.depth)
    for kind in (SetKind.UB, SetKind.UB_EPS, SetKind.ORT_EPS):
        s = _load_set(sets_dir, DiscParams(head.n, head.depth), kind)
        if (s.n, s.depth) != (head.n, head.depth):
            raise CliError("set parameters differ from the matrix stream", EXIT_MISMATCH)
    ckpt_path = Path(args.checkpoint) if args.checkpoint else out.with_name(out.name + ".ckpt")
    certs = []
    start = 0
    if args.resume and ckpt_path.exists() and out.exists():
        ck = json.loads(ckpt_path.read_text())
        if (ck.get("n"), ck.get("depth"), ck.get("input")) != (head.n, head.depth, str(inp)):
            raise CliError(f"checkpoint {ckpt_path} belongs to another run", EXIT_MISMATCH)
        _, certs = read_certificates(out)
        start = int(ck["next_index"])
        certs = certs[:start]

    def checkpoint() -> None:
        write_certificates(out, params, certs)
        state = {
            "n": head.n, "depth": head.depth, "input": str(inp), "next_index": len(certs),
            "counts": _verdict_counts(certs), "wall_clock": time.time(),
        }
        _atomic_write_text(ckpt_path, json.dumps(state) + "\n")

    threads = max(1, args.threads)
    last = time.monotonic()
    jobs = [(cores[i], budget, not args.no_elapsed) for i in range(start, cores.shape[0])]
    step = max(threads, 1)
    if threads == 1:
        _stage2_init(str(sets_dir), head.n, head.depth)
        pool = None
    else:
        pool = ProcessPoolExecutor(threads, initializer=_stage2_init, initargs=(str(sets_dir), head.n, head.depth))
    try:
        for lo in range(0, len(jobs), step):
            chunk = jobs[lo : lo + step]
            done = pool.map(_stage2_one, chunk) if pool else map(_stage2_one, chunk)
            certs.extend(done)
            if time.monotonic() - last >= args.checkpoint_interval:
                checkpoint()
                last = time.monotonic()
    finally:
        if pool:
            pool.shutdown()
    checkpoint()
    counts = _verdict_counts(certs)
    print(f"stage2 n={head.n}: contradiction={counts['contradiction']} "
          f"extension_found={counts['extension_found']} unresolved={counts['unresolved']} -> {out}")
    return EXIT_UNRESOLVED if counts["unresolved"] else EXIT_OK


def _verdict_counts(certs) -> dict[str, int]:
    counts = {v.name.lower(): 0 for v in Verdict}
    for c in certs:
        counts[c.verdict.name.lower()] += 1
    return counts


# ---------------------------------------------------------------------------
# verify


def _eps_predicate(bins: np.ndarray, kind: FeasKind, params: DiscParams) -> np.ndarray:
    """Regenerated eps membership: some v - e (e in {0,1}^5) survives descent."""
    out = np.zeros(bins.shape[0], bool)
    for e in range(32):
        shift = np.array([(e >> (NBINS - 1 - c)) & 1 for c in range(NBINS)])
        ok, _ = descend_many((bins - shift) % params.n, kind, params)
        out |= ok
    return out


def _spot_indices(count: int, limit: int) -> np.ndarray:
    if count <= limit:
        return np.arange(count)
    return np.sort(np.random.default_rng(count).choice(count, limit, replace=False))


def _verify_set(path: Path, data: bytes, spot: int) -> list[str]:
    s = VectorSet.from_bytes(data)
    params = s.params
    problems = []
    idx = _spot_indices(len(s), spot)
    bins = s.bins[idx].astype(np.int64)
    if s.kind in (SetKind.ORT_MON, SetKind.UB_MON, SetKind.ORT, SetKind.UB):
        ok, _ = descend_many(bins, s.kind.feas, params)
        if s.kind in (SetKind.ORT_MON, SetKind.UB_MON):
            ok &= np.all(np.diff(bins, axis=1) >= 0, axis=1)
    elif s.kind in (SetKind.ORT_EPS, SetKind.UB_EPS):
        ok = _eps_predicate(bins, s.kind.feas, params)
    else:
        ok = np.ones(idx.size, bool)
    for j in np.flatnonzero(~ok)[:10]:
        i = int(idx[j])
        problems.append(f"record {i} {DiscVec(tuple(bins[j]))} fails the {s.kind.name} predicate "
                        f"at byte {HEADER.size + RECORD_BYTES * i}")
    print(f"{path}: {s.kind.name} n={s.n} depth={s.depth} count={len(s)}; "
          f"checked order, range and {idx.size} predicate spot-checks")
    return problems


def _verify_matrices(path: Path, data: bytes, spot: int) -> list[str]:
    head = read_stream_header(data)
    expected = MAT_HEADER.size + MAT_RECORD * head.count
    if len(data) != expected:
        raise SetFormatError(f"size {len(data)} does not match count {head.count}", min(len(data), expected))
    params = _params(head.n, head.depth)
    body = np.frombuffer(data, dtype="<u2", offset=MAT_HEADER.size).reshape(head.count, NBINS, NBINS).astype(np.int64)
    problems = []
    bad = np.flatnonzero((body >= head.n).reshape(head.count, -1).any(axis=1))
    if bad.size:
        raise SetFormatError(f"record {bad[0]} has a bin >= n", MAT_HEADER.size + MAT_RECORD * int(bad[0]))
    for i in range(head.count):
        if not is_canonical(DiscMat.from_core(body[i])):
            problems.append(f"record {i} is not canonical at byte {MAT_HEADER.size + MAT_RECORD * i}")
            if len(problems) >= 10:
                return problems
    idx = _spot_indices(head.count, spot)
    for i in idx:
        core = body[i]
        vecs = np.vstack([core, core.T])
        ok, _ = descend_many(vecs, FeasKind.ORTHOGONAL, params)
        diffs = [(core[b] - core[a]) % head.n for a in range(NBINS) for b in range(a + 1, NBINS)]
        diffs += [(core[:, b] - core[:, a]) % head.n for a in range(NBINS) for b in range(a + 1, NBINS)]
        dok = _eps_predicate(np.array(diffs), FeasKind.ORTHOGONAL, params)
        if not ok.all() or not dok.all():
            problems.append(f"record {i} violates a row/column predicate at byte {MAT_HEADER.size + MAT_RECORD * int(i)}")
    kind = "HAD" if head.kind == KIND_HAD else "PREHAD"
    print(f"{path}: {kind} n={head.n} depth={head.depth} shard={head.shard}/{head.total} count={head.count}; "
          f"checked canonical form and {idx.size} predicate spot-checks")
    return problems


def _verify_certs(path: Path, data: bytes, sets_dir: Path | None, budget: float) -> tuple[list[str], bool]:
    params, certs = certs_from_bytes(data)
    problems = []
    unresolved = False
    if sets_dir is None:
        print(f"{path}: {len(certs)} certificates parsed; pass --sets to re-check them")
        return problems, False
    sets = Stage2Sets(
        _load_set(sets_dir, params, SetKind.UB),
        _load_set(sets_dir, params, SetKind.UB_EPS),
        _load_set(sets_dir, params, SetKind.ORT_EPS),
    )
    offs = record_offsets(certs)
    for i, cert in enumerate(certs):
        if cert.verdict is Verdict.UNRESOLVED:
            unresolved = True
            continue
        try:
            recheck_certificate(cert, sets, budget)
        except IntegrityError as exc:
            problems.append(f"certificate {i} at byte {offs[i]}: {exc}")
    print(f"{path}: {len(certs)} certificates n={params.n} depth={params.depth}; "
          f"{_verdict_counts(certs)}")
    return problems, unresolved


def cmd_verify(args) -> int:
    path = Path(args.path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_USAGE) from None
    magic = data[:8]
    unresolved = False
    try:
        if magic == MAGIC:
            problems = _verify_set(path, data, args.spot_checks)
        elif magic == MAT_MAGIC:
            problems = _verify_matrices(path, data, args.spot_checks)
        elif magic == CRT_MAGIC:
            problems, unresolved = _verify_certs(path, data, Path(args.sets) if args.sets else None, args.budget)
        else:
            raise SetFormatError(f"unrecognised magic {magic!r}", 0)
    except SetFormatError as exc:
        print(f"{path}: CORRUPT: {exc} at byte {exc.offset}")
        return EXIT_CORRUPT
    if problems:
        for p in problems:
            print(f"{path}: CORRUPT: {p}")
        return EXIT_CORRUPT
    if unresolved:
        print(f"{path}: contains unresolved certificates")
        return EXIT_UNRESOLVED
    print(f"{path}: clean")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-vector and shard-plan


def cmd_check_vector(args) -> int:
    params = _params(args.n, args.depth)
    try:
        vec = DiscVec.parse(args.bins)
        vec.check(params.n)
        kind = FeasKind.parse(args.kind)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    from .certify import oracle_feasible

    verdict = descend(vec, kind, params)
    print(f"vector {vec} kind={kind.name.lower()} n={params.n} depth={params.depth}")
    if verdict.survives:
        print("descend: survives")
    else:
        print(f"descend: rejected at generation {verdict.rejected_at_generation}")
    oracle = oracle_feasible(vec, kind, params.n, args.oracle_depth)
    print(f"oracle: {oracle.value}")
    if oracle is Feasibility.FEASIBLE and not verdict.survives:
        print("WARNING: descend rejected an oracle-feasible vector")
    return EXIT_OK


def cmd_shard_plan(args) -> int:
    params = _params(args.n, args.depth)
    sets_dir = Path(args.sets)
    mon = _load_set(sets_dir, params, SetKind.ORT_MON)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    total = args.machines
    if total < 1:
        raise CliError("--machines must be >= 1", EXIT_USAGE)
    for i in range(total):
        m = RunManifest(
            n=params.n, depth=params.depth, shard_index=i, shard_total=total,
            sets_dir=str(sets_dir), output=str(out / f"prehad_n{params.n}_s{i}of{total}.mub6mat"),
            budget_s=args.budget, checkpoint_s=args.checkpoint_interval,
        )
        m.save(out / f"shard_{i:0{len(str(total - 1))}d}.json")
    rows = [len(range(i, len(mon), total)) for i in range(total)]
    print(f"{total} manifests for n={params.n} depth={params.depth} in {out}; "
          f"second-row choices per shard: min {min(rows)}, max {max(rows)} (of {len(mon)})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mub6", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    threads = _default_threads()

    g = sub.add_parser("gen-sets", help="generate ORT/UB vector sets")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--depth", type=int, default=8)
    g.add_argument("--kinds", default="ort,ub", help="comma-separated: ort,ub")
    g.add_argument("--out", default="sets")
    g.add_argument("--threads", type=int, default=threads)
    g.add_argument("--digest", action="store_true", help="also write .sha256 sidecars")
    g.set_defaults(func=cmd_gen_sets)

    e = sub.add_parser("enumerate", help="enumerate PREHAD (or pruned HAD) matrices of one shard")
    e.add_argument("--n", type=int)
    e.add_argument("--depth", type=int, default=8)
    e.add_argument("--shard", help="i/m: second-row indices congruent to i mod m")
    e.add_argument("--sets", default="sets")
    e.add_argument("--out")
    e.add_argument("--manifest")
    e.add_argument("--prune", action="store_true")
    e.add_argument("--refine-depth", type=int, default=1)
    e.add_argument("--prune-nodes", type=int, default=1 << 22, help="per-matrix node cap; capped matrices are kept")
    e.add_argument("--limit", type=int, help="stop after this many output matrices")
    e.add_argument("--batch", type=int, default=1 << 14)
    e.add_argument("--checkpoint")
    e.add_argument("--checkpoint-interval", type=float, default=DEFAULT_CHECKPOINT_S)
    e.add_argument("--resume", action="store_true")
    e.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    e.add_argument("--threads", type=int, default=threads, help="accepted for symmetry; parallelism is per shard")
    e.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("stage2", help="attempt B/C completion for every matrix of a stream")
    s.add_argument("--input")
    s.add_argument("--sets", default="sets")
    s.add_argument("--out")
    s.add_argument("--manifest")
    s.add_argument("--budget", type=float, default=DEFAULT_BUDGET_S, help="seconds per matrix")
    s.add_argument("--threads", type=int, default=threads)
    s.add_argument("--checkpoint")
    s.add_argument("--checkpoint-interval", type=float, default=DEFAULT_CHECKPOINT_S)
    s.add_argument("--resume", action="store_true")
    s.add_argument("--no-elapsed", action="store_true", help="store 0 ms so reruns are byte-identical")
    s.set_defaults(func=cmd_stage2)

    v = sub.add_parser("verify", help="validate a set, matrix-stream or certificate file")
    v.add_argument("path")
    v.add_argument("--sets", help="set directory, needed to re-check certificates")
    v.add_argument("--spot-checks", type=int, default=SPOT_CHECKS)
    v.add_argument("--budget", type=float, default=DEFAULT_BUDGET_S)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check-vector", help="descend verdict and oracle verdict for one vector")
    c.add_argument("bins", help="e.g. 0,0,8,0,8,8")
    c.add_argument("--kind", default="ort")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--depth", type=int, default=8)
    c.add_argument("--oracle-depth", type=int, default=20)
    c.set_defaults(func=cmd_check_vector)

    sp = sub.add_parser("shard-plan", help="write one run manifest per machine")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--depth", type=int, default=8)
    sp.add_argument("--sets", default="sets")
    sp.add_argument("--machines", type=int, required=True)
    sp.add_argument("--out", default="manifests")
    sp.add_argument("--budget", type=float, default=DEFAULT_BUDGET_S)
    sp.add_argument("--checkpoint-interval", type=float, default=DEFAULT_CHECKPOINT_S)
    sp.set_defaults(func=cmd_shard_plan)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mub6: error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigurationError as exc:
        print(f"mub6: error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
