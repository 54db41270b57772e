"""Drives the xapp-store binary end to end: serve, pack, submit, report."""

import json
import pathlib
import signal
import subprocess
import sys
import tempfile

binary, root = sys.argv[1], pathlib.Path(sys.argv[2])
failures = []


def check(name, cond, detail=""):
    print(f"{'ok  ' if cond else 'FAIL'} {name} {detail}".rstrip())
    if not cond:
        failures.append(name)


def run(*args, timeout=60):
    return subprocess.run([binary, *args], capture_output=True, text=True, timeout=timeout)


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    server = subprocess.Popen(
        [binary, "serve", "--port", "0", "--data-dir", str(tmp / "data")],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        port = int(server.stdout.readline().strip())
        check("serve prints the bound port", 0 < port < 65536, str(port))
        url = f"http://127.0.0.1:{port}"

        good = tmp / "good.xapp"
        r = run("fetch-and-pack", str(root / "packages" / "kpm-monitor"), "-o", str(good))
        check("pack", r.returncode == 0 and good.exists(), r.stderr)

        r = run("submit", str(good), "--server", url, "--wait")
        lines = r.stdout.split()
        check("submit exits 0", r.returncode == 0, r.stderr)
        check("submit prints id then AVAILABLE", len(lines) == 2 and len(lines[0]) == 16 and lines[1] == "AVAILABLE",
              str(lines))
        rid = lines[0] if lines else ""

        r = run("report", rid, "--server", url)
        check("report of a passing package", r.returncode == 0 and json.loads(r.stdout)["verdict"] == "PASS")

        r = run("report", "0000000000000000", "--server", url)
        check("report of an unknown id exits 1", r.returncode == 1, str(r.returncode))
        check("report of an unknown id shows 404", "404" in r.stderr and "UNKNOWN_ID" in r.stderr, r.stderr.strip())

        r = run("list", "--server", url)
        check("list", r.returncode == 0 and len(json.loads(r.stdout)) == 1)
        r = run("status", "--server", url)
        check("status", r.returncode == 0 and "router" in json.loads(r.stdout))
    finally:
        server.send_signal(signal.SIGTERM)
        try:
            code = server.wait(timeout=30)
        except subprocess.TimeoutExpired:
            server.kill()
            code = None
    check("graceful shutdown", code == 0, str(code))
    check("shutdown persisted the store", (tmp / "data" / "store.json").exists())

    r = run("validate", str(root / "packages" / "bad-missing-author"))
    check("offline validation fails", r.returncode == 1 and "MISSING_FIELD author" in r.stdout, r.stdout.strip())
    r = run("validate", str(root / "packages" / "kpm-monitor"))
    check("offline validation passes", r.returncode == 0)

    r = run("frobnicate")
    check("usage error exits 2", r.returncode == 2, str(r.returncode))
    r = run("submit")
    check("missing argument exits 2", r.returncode == 2, str(r.returncode))

    r = run("simulate", str(root / "scenarios" / "two-gnb-crossing.json"), "--ticks", "100")
    kinds = [json.loads(line)["kind"] for line in r.stdout.splitlines()]
    check("simulate shows one handover", r.returncode == 0 and kinds.count("HANDOVER") == 1, str(kinds.count("HANDOVER")))

    r = run("serve", "--port", "0", "--data-dir", "/proc/forbidden")
    check("unusable data dir fails at startup", r.returncode != 0, str(r.returncode))

sys.exit(1 if failures else 0)
