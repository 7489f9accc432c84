#!/usr/bin/env python3
"""Answer a labeling session over HTTP with the ground-truth oracle.

Creates a session on a running `tracklabel serve`, answers every query it
issues and writes the exported labels. With the same config the result is
identical to `tracklabel label` run in-process.

    oracle_client.py --url http://127.0.0.1:8080 --config cfg.json -o labels.txt
"""

import argparse
import json
import sys
import urllib.error
import urllib.request

import tracklabel


def call(url, method="GET", body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=600) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read() or b"{}")


def run(url, config, session_id=None, limit=0):
    body = {"config": config}
    if session_id:
        body["session_id"] = session_id
    status, created = call(f"{url}/sessions", "POST", body)
    if status != 201:
        raise RuntimeError(f"create session: {status} {created}")
    sid = created["session_id"]

    oracle = tracklabel.OracleAnnotator(tracklabel.pipeline_target(config))
    answered = rejected = 0
    while True:
        q = f"{url}/sessions/{sid}/queries" + (f"?limit={limit}" if limit else "")
        status, page = call(q)
        if status != 200:
            raise RuntimeError(f"queries: {status} {page}")
        if page["complete"]:
            break
        if not page["queries"]:
            raise RuntimeError("session is not complete but has no pending queries")
        for query in page["queries"]:
            response = tracklabel.oracle_answer(oracle, query)
            status, out = call(f"{url}/sessions/{sid}/responses", "POST", response)
            if status == 409:
                # Same rule as the in-process loop: a rejected answer is skipped.
                rejected += 1
                status, out = call(f"{url}/sessions/{sid}/responses", "POST",
                                   {"query_id": query["query_id"], "skip": True})
            if status != 200:
                raise RuntimeError(f"respond: {status} {out}")
            answered += 1

    status, labels = call(f"{url}/sessions/{sid}/labels")
    if status != 200:
        raise RuntimeError(f"labels: {status} {labels}")
    return {"session_id": sid, "answered": answered, "rejected": rejected, "labels": labels}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--url", default="http://127.0.0.1:8080")
    ap.add_argument("--config", help="pipeline config JSON file")
    ap.add_argument("--benchmark", type=int, help="standard benchmark seed index instead of --config")
    ap.add_argument("--session-id")
    ap.add_argument("--limit", type=int, default=0, help="queries fetched per request (0: all)")
    ap.add_argument("-o", "--output", help="label file to write (MOT format)")
    args = ap.parse_args(argv)

    if args.benchmark is not None:
        config = tracklabel.standard_benchmark(args.benchmark)
    elif args.config:
        with open(args.config) as f:
            config = json.load(f)
    else:
        ap.error("one of --config or --benchmark is required")

    result = run(args.url.rstrip("/"), config, args.session_id, args.limit)
    if args.output:
        with open(args.output, "w") as f:
            f.write(result["labels"]["mot"])
        with open(args.output + ".prov", "w") as f:
            f.write(result["labels"]["provenance"])
    print(json.dumps({k: result[k] for k in ("session_id", "answered", "rejected")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
