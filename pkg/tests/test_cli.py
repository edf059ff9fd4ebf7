from __future__ import annotations

import json
import subprocess
import sys

from conftest import FIXTURES, REPO_ROOT


def run_cli(*args, cwd=REPO_ROOT):
    return subprocess.run(
        [sys.executable, "-m", "council.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def test_replay_writes_metrics(tmp_path):
    out = tmp_path / "metrics.json"
    result = run_cli("replay", "--fixture", str(FIXTURES / "five_turn_session.json"), "--out", str(out))
    assert result.returncode == 0, result.stderr
    metrics = json.loads(out.read_text())
    assert metrics["user_message_count"] == 5
    assert metrics["pinned_total"] == 2
    assert "5 user messages" in result.stdout


def test_replay_session_out_deterministic(tmp_path):
    args = ["replay", "--fixture", str(FIXTURES / "five_turn_session.json")]
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    run_cli(*args, "--out", str(tmp_path / "m1.json"), "--session-out", str(first))
    run_cli(*args, "--out", str(tmp_path / "m2.json"), "--session-out", str(second))
    assert first.read_bytes() == second.read_bytes()


def test_replay_missing_fixture_errors(tmp_path):
    result = run_cli("replay", "--fixture", str(tmp_path / "nope.json"), "--out", str(tmp_path / "m.json"))
    assert result.returncode == 2
    assert "error" in result.stderr


def test_serve_with_bad_config_errors(tmp_path):
    config = tmp_path / "svc.conf"
    config.write_text("provider = scripted\nfixture = /does/not/exist.json\n")
    result = run_cli("serve", "--config", str(config))
    assert result.returncode == 2
    assert "fixture" in result.stderr


def test_serve_live_without_credentials_errors(tmp_path, monkeypatch):
    config = tmp_path / "svc.conf"
    config.write_text("provider = live\n")
    env_result = subprocess.run(
        [sys.executable, "-m", "council.cli", "serve", "--config", str(config)],
        capture_output=True,
        text=True,
        cwd=REPO_ROOT,
        env={"PATH": "/usr/bin:/bin", "PYTHONPATH": str(REPO_ROOT / "src")},
    )
    assert env_result.returncode == 2
    assert "COUNCIL_LLM_API_KEY" in env_result.stderr
