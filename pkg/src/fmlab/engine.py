"""Deterministic indexed Monte Carlo engine.

Samples are pure functions of (context, sample index): the index derives the
random stream, so any subset can be computed anywhere, in any order, by any
number of workers, and the aggregate is reduced in index order afterwards.
Completed samples are checkpointed as JSON lines (written in index order) and
skipped on resume.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor

_CHUNK = 32  # samples per worker task


def _run_chunk(task_fn, ctx, indices):
    return [(i, task_fn(ctx, i)) for i in indices]


def load_checkpoint(path):
    """Parse completed samples from a JSON-lines checkpoint, tolerating a torn tail."""
    done, _ = _scan_checkpoint(path)
    return done


def _scan_checkpoint(path):
    """(done samples, byte offset where valid content ends)."""
    done = {}
    good_end = 0
    if path is None or not os.path.exists(path):
        return done, good_end
    with open(path, "rb") as fh:
        for raw in fh:
            if not raw.endswith(b"\n"):
                break  # torn final line from an interrupted run
            line = raw.strip()
            if line:
                try:
                    rec = json.loads(line)
                    done[int(rec["i"])] = rec["p"]
                except (json.JSONDecodeError, KeyError, ValueError):
                    break
            good_end += len(raw)
    return done, good_end


def run_indexed(task_fn, ctx, n_samples, workers=1, checkpoint_path=None):
    """Evaluate task_fn(ctx, i) for i in 0..n_samples-1; returns payloads in order.

    task_fn must be a module-level function (it crosses process boundaries)
    and must depend only on (ctx, i).  Checkpoint lines are flushed in index
    order so the file is reproducible byte for byte across worker counts.
    """
    done, good_end = _scan_checkpoint(checkpoint_path)
    payloads = dict(done)
    todo = [i for i in range(n_samples) if i not in payloads]

    writer = None
    written_upto = 0
    if checkpoint_path is not None:
        if os.path.exists(checkpoint_path) and os.path.getsize(checkpoint_path) > good_end:
            with open(checkpoint_path, "r+b") as fh:
                fh.truncate(good_end)  # drop the torn tail before appending
        writer = open(checkpoint_path, "a", encoding="utf-8")
        while written_upto in done:
            written_upto += 1

    def flush_ready():
        nonlocal written_upto
        if writer is None:
            return
        while written_upto in payloads:
            line = json.dumps(
                {"i": written_upto, "p": payloads[written_upto]},
                sort_keys=True,
                separators=(",", ":"),
            )
            if written_upto not in done:
                writer.write(line + "\n")
            written_upto += 1
        writer.flush()

    try:
        if workers <= 1 or len(todo) <= 1:
            for i in todo:
                payloads[i] = task_fn(ctx, i)
                flush_ready()
        else:
            # compute the first pending sample inline so numba kernels are
            # compiled (and disk-cached) before the pool forks
            first = todo[0]
            payloads[first] = task_fn(ctx, first)
            flush_ready()
            rest = todo[1:]
            chunks = [rest[j:j + _CHUNK] for j in range(0, len(rest), _CHUNK)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_chunk, task_fn, ctx, idx) for idx in chunks]
                for fut in futures:
                    for i, payload in fut.result():
                        payloads[i] = payload
                    flush_ready()
    finally:
        if writer is not None:
            flush_ready()
            writer.close()

    return [payloads[i] for i in range(n_samples)]
