"""External-policy wire protocol: framing, handshake, doubles, and the
served-policy round trip."""

import json
import socket
import subprocess
import sys
import textwrap
import threading
import time

import pytest

from pegsolve.errors import ProtocolError
from pegsolve.game import GlobalState, load_spec, make_spec, spec_to_config
from pegsolve.graph import gen_grid, graph_to_text
from pegsolve.policies import PolicyHandle
from pegsolve.sim import episode_seed, evaluate, run_episode

STAY_POLICY = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            side = msg["side"]
            out = {"type": "ready", "fingerprint": msg["fingerprint"]}
        elif msg["type"] == "act":
            move = msg["s_p"] if side == "pursuer" else msg["s_e"]
            out = {"type": "move", "move": move}
        else:
            continue
        sys.stdout.write(json.dumps(out) + "\\n")
        sys.stdout.flush()
    """
)

ILLEGAL_POLICY = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            out = {"type": "ready", "fingerprint": msg["fingerprint"]}
        elif msg["type"] == "act":
            out = {"type": "move", "move": -1, "junk": "ignored"}
        else:
            continue
        sys.stdout.write(json.dumps(out) + "\\n")
        sys.stdout.flush()
    """
)

BAD_FINGERPRINT_POLICY = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["type"] == "hello":
            out = {"type": "ready", "fingerprint": "deadbeef"}
            sys.stdout.write(json.dumps(out) + "\\n")
            sys.stdout.flush()
    """
)


def write_script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body)
    return [sys.executable, str(path)]


@pytest.fixture()
def grid_spec():
    return make_spec(gen_grid(4, 4), 2, horizon=6)


class TestStdioDoubles:
    def test_stay_double_runs_to_timeout(self, tmp_path, grid_spec):
        cmd = write_script(tmp_path, "stay.py", STAY_POLICY)
        pursuer = PolicyHandle("pursuer", "external", command=cmd, timeout=10)
        evader = PolicyHandle("evader", "stay")
        res = run_episode(
            grid_spec, pursuer, evader, seed=episode_seed(7, 0),
            initial=GlobalState((0, 15), 5),
        )
        assert res.outcome == "timeout"
        assert res.steps == grid_spec.horizon

    def test_stay_double_state_unchanged(self, tmp_path, grid_spec):
        cmd = write_script(tmp_path, "stay.py", STAY_POLICY)
        pursuer = PolicyHandle("pursuer", "external", command=cmd, timeout=10)
        bound = pursuer.bind(grid_spec)
        bound.begin_episode(0, 1, grid_spec)
        s = GlobalState((3, 9), 0)
        assert bound.act(s) == (3, 9)
        bound.close()

    def test_illegal_reply_aborts(self, tmp_path, grid_spec):
        cmd = write_script(tmp_path, "bad.py", ILLEGAL_POLICY)
        evader = PolicyHandle("evader", "external", command=cmd, timeout=10)
        bound = evader.bind(grid_spec)
        bound.begin_episode(0, 1, grid_spec)
        with pytest.raises(ProtocolError, match="illegal move"):
            bound.act(GlobalState((0, 15), 5))
        bound.close()

    def test_fingerprint_mismatch_aborts(self, tmp_path, grid_spec):
        cmd = write_script(tmp_path, "fp.py", BAD_FINGERPRINT_POLICY)
        handle = PolicyHandle("evader", "external", command=cmd, timeout=10)
        with pytest.raises(ProtocolError, match="fingerprint"):
            handle.bind(grid_spec)

    def test_dead_process_detected(self, grid_spec):
        handle = PolicyHandle(
            "evader", "external",
            command=[sys.executable, "-c", "pass"], timeout=5,
        )
        with pytest.raises(ProtocolError):
            handle.bind(grid_spec)

    def test_timeout_detected(self, grid_spec):
        slow = [sys.executable, "-c", "import time; time.sleep(30)"]
        handle = PolicyHandle("evader", "external", command=slow, timeout=0.5)
        start = time.monotonic()
        with pytest.raises(ProtocolError, match="timed out"):
            handle.bind(grid_spec)
        assert time.monotonic() - start < 5


class TestServedPolicies:
    def _spec_files(self, tmp_path, spec, graph, exits=()):
        (tmp_path / "g.graph").write_text(graph_to_text(graph, exits))
        (tmp_path / "spec.json").write_text(
            json.dumps(spec_to_config(spec, "g.graph"))
        )
        return tmp_path / "spec.json"

    def test_served_sps_equals_in_process_sps(self, tmp_path):
        graph = gen_grid(4, 4)
        spec = make_spec(graph, 2, horizon=16)
        cfg = self._spec_files(tmp_path, spec, graph)
        loaded = load_spec(cfg)
        assert loaded.fingerprint == spec.fingerprint
        cmd = [
            sys.executable, "-m", "pegsolve", "serve",
            "--spec", str(cfg), "--kind", "sps",
        ]
        external = PolicyHandle("pursuer", "external", command=cmd, timeout=30)
        native = PolicyHandle("pursuer", "sps")
        evader = PolicyHandle("evader", "sps")
        # same seeds, same policy behind the wire: identical trajectories
        for i in range(3):
            seed = episode_seed(11, i)
            a = run_episode(spec, external, evader, seed, record_trajectory=True)
            b = run_episode(spec, native, evader, seed, record_trajectory=True)
            assert a.outcome == b.outcome and a.steps == b.steps
            assert a.trajectory == b.trajectory

    def test_served_over_tcp(self, tmp_path):
        graph = gen_grid(3, 3)
        spec = make_spec(graph, 1, capture_radius=0, horizon=8)
        cfg = self._spec_files(tmp_path, spec, graph)
        port = _free_port()
        server = subprocess.Popen(
            [
                sys.executable, "-m", "pegsolve", "serve",
                "--spec", str(cfg), "--kind", "stay", "--tcp", str(port),
            ],
            stderr=subprocess.PIPE,
        )
        try:
            banner = server.stderr.readline()  # listening once this appears
            assert b"serving" in banner
            handle = PolicyHandle(
                "evader", "external", address=("127.0.0.1", port), timeout=10
            )
            bound = handle.bind(spec)
            bound.begin_episode(0, 1, spec)
            assert bound.act(GlobalState((0,), 8)) == 8
            bound.close()
        finally:
            server.terminate()
            server.wait(timeout=10)

    def test_feature_payload_included_when_requested(self, tmp_path):
        graph = gen_grid(3, 3)
        spec = make_spec(graph, 1, horizon=4)
        recorder = tmp_path / "seen.jsonl"
        script = textwrap.dedent(
            f"""
            import json, sys
            log = open({str(recorder)!r}, "w")
            for line in sys.stdin:
                msg = json.loads(line)
                if msg["type"] == "hello":
                    out = {{"type": "ready", "fingerprint": msg["fingerprint"]}}
                elif msg["type"] == "act":
                    log.write(line)
                    log.flush()
                    out = {{"type": "move", "move": msg["s_e"]}}
                else:
                    continue
                sys.stdout.write(json.dumps(out) + "\\n")
                sys.stdout.flush()
            """
        )
        cmd = write_script(tmp_path, "recorder.py", script)
        evader = PolicyHandle(
            "evader", "external", command=cmd, send_feature=True, timeout=10
        )
        bound = evader.bind(spec)
        bound.begin_episode(0, 1, spec)
        bound.act(GlobalState((0,), 8))
        bound.close()
        seen = json.loads(recorder.read_text().splitlines()[0])
        assert seen["feature"]["c"] == 8  # evader-side acting index
        assert len(seen["feature"]["rows"]) == spec.m + 1


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_external_evaluate_end_to_end(tmp_path):
    graph = gen_grid(4, 4)
    spec = make_spec(graph, 2, horizon=12)
    (tmp_path / "g.graph").write_text(graph_to_text(graph))
    (tmp_path / "spec.json").write_text(json.dumps(spec_to_config(spec, "g.graph")))
    cmd = [
        sys.executable, "-m", "pegsolve", "serve",
        "--spec", str(tmp_path / "spec.json"), "--kind", "dp",
    ]
    external = PolicyHandle("pursuer", "external", command=cmd, timeout=60)
    native_table = PolicyHandle("pursuer", "dp")
    evader = PolicyHandle("evader", "dp")
    a = evaluate(spec, external, evader, episodes=4, base_seed=300)
    b = evaluate(spec, native_table, evader, episodes=4, base_seed=300)
    assert a.success_rate == b.success_rate
    assert a.mean_steps == b.mean_steps
