"""The service path answered by tools/oracle_client.py matches `tracklabel label`."""

import json
import os
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

ROOT = Path(os.environ.get("TRACKLABEL_SOURCE_DIR", Path(__file__).resolve().parents[2]))
CLI = os.environ.get("TRACKLABEL_CLI", str(ROOT / "build" / "tools" / "tracklabel"))

pytestmark = pytest.mark.skipif(not Path(CLI).exists(), reason="tracklabel CLI not built")


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def server(tmp_path):
    port = free_port()
    env = dict(os.environ)
    env.pop("TRACKLABEL_DATA_ROOT", None)
    proc = subprocess.Popen([CLI, "serve", "--port", str(port), "--data-root", str(tmp_path / "data")],
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, env=env)
    url = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            urllib.request.urlopen(f"{url}/sessions/none/queries", timeout=1)
        except urllib.error.HTTPError:
            break
        except OSError:
            time.sleep(0.05)
    yield url, tmp_path / "data"
    proc.terminate()
    proc.wait(timeout=10)


def test_oracle_client_matches_in_process_label(server, tmp_path):
    url, data = server
    out = tmp_path / "client" / "labels.txt"
    out.parent.mkdir()
    client = subprocess.run([sys.executable, str(ROOT / "tools" / "oracle_client.py"), "--url", url,
                             "--benchmark", "1", "--session-id", "b1", "--limit", "25", "-o", str(out)],
                            capture_output=True, text=True, check=True)
    summary = json.loads(client.stdout)
    assert summary["session_id"] == "b1"
    assert summary["answered"] > 0

    direct = tmp_path / "direct"
    subprocess.run([CLI, "label", "--benchmark", "1", "-o", str(direct)], capture_output=True, check=True)
    assert out.read_text() == (direct / "labels.txt").read_text()
    assert Path(str(out) + ".prov").read_text() == (direct / "labels.prov").read_text()

    # The session's audit log carries the same click total as the in-process ledger.
    ledger = json.loads((direct / "ledger.json").read_text())
    audit = [json.loads(line) for line in (data / "sessions" / "b1" / "audit.jsonl").read_text().splitlines()]
    assert sum(r.get("clicks", 0) for r in audit if r["event"] == "response") == ledger["spent_total"]
