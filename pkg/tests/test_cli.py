import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from connstream.cli import main
from connstream.core import deserialize_network
from connstream.netio import FRAME_ACK, FRAME_NETWORK, encode_frame, read_frame
from connstream.recording import save_rawx
from connstream.simulate import SimulationSpec, generate


@pytest.fixture(scope="module")
def sim_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("rec") / "sim"
    rec, _ = generate(SimulationSpec(n_trials=6), seed=11)
    save_rawx(path, rec)
    return path


class TestSimulateCommand:
    def test_writes_recording_and_info(self, tmp_path, capsys):
        out = tmp_path / "sim"
        assert main(["simulate", str(out), "--seed", "3", "--trials", "4"]) == 0
        assert (tmp_path / "sim.json").exists()
        assert (tmp_path / "sim.f32").exists()
        info = json.loads((tmp_path / "sim.info.json").read_text())
        assert len(info["markers"]) == 4 and info["seed"] == 3

    def test_seed_required(self):
        with pytest.raises(SystemExit):
            main(["simulate", "out"])


class TestOfflineCommand:
    def test_writes_network_and_convergence(self, sim_path, tmp_path):
        out = tmp_path / "net.json"
        rc = main(["offline", str(sim_path), str(out),
                   "--metric", "wpli", "--band", "15:21", "--speed", "0"])
        assert rc == 0
        net = deserialize_network(out.read_bytes())
        assert net.metric.value == "WPLI"
        assert (net.band.lo_bin, net.band.hi_bin) == (15, 21)
        conv = (tmp_path / "net.convergence.csv").read_text().splitlines()
        assert conv[0] == "n_trials,mean_top20_weight"
        assert len(conv) == 1 + 6

    def test_byte_identical_reruns(self, sim_path, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["offline", str(sim_path), str(out),
                         "--band", "15:21", "--speed", "0"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_recording_exit_2(self, tmp_path):
        assert main(["offline", str(tmp_path / "nope"),
                     str(tmp_path / "o.json")]) == 2

    def test_bad_metric_exit_3(self, sim_path, tmp_path):
        rc = main(["offline", str(sim_path), str(tmp_path / "o.json"),
                   "--metric", "bogus"])
        assert rc == 3

    def test_config_file_toml(self, sim_path, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('metric = "PLV"\nband = [15, 21]\nspeed = 0.0\n')
        out = tmp_path / "o.json"
        assert main(["offline", str(sim_path), str(out),
                     "--config", str(cfg)]) == 0
        assert deserialize_network(out.read_bytes()).metric.value == "PLV"

    def test_config_file_json(self, sim_path, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"metric": "PLI", "band": [15, 21],
                                   "speed": 0.0}))
        out = tmp_path / "o.json"
        assert main(["offline", str(sim_path), str(out),
                     "--config", str(cfg)]) == 0
        assert deserialize_network(out.read_bytes()).metric.value == "PLI"


class TestBenchCommand:
    def test_writes_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["bench", "--metrics", "COR,COH", "--nodes", "8",
                   "--windows", "100", "--trials", "2", "--repeats", "2",
                   "--nfft", "128", "--output", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("metric,")
        assert len(lines) == 3


class TestFilterDesignCommand:
    def test_prints_json(self, capsys):
        assert main(["filter-design", "lowpass", "40"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["kind"] == "lowpass" and obj["n_taps"] % 2 == 1

    def test_invalid_cutoff_exit_3(self, capsys):
        assert main(["filter-design", "lowpass", "500"]) == 3


def _find_metric_frame(sock, deadline=10.0):
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        ftype, payload = read_frame(sock)
        if ftype == FRAME_NETWORK:
            return json.loads(payload)
    raise TimeoutError("no network frame")


class TestServeCommand:
    def test_serve_publishes_and_matches_offline(self, sim_path, tmp_path):
        out = tmp_path / "final.json"
        proc = subprocess.Popen(
            [sys.executable, "-m", "connstream.cli", "serve", str(sim_path),
             "--port", "0", "--speed", "0", "--band", "15:21",
             "--output", str(out)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        try:
            banner = proc.stdout.readline()
            port = int(banner.split("TCP on ")[1].split(",")[0])
            client = socket.create_connection(("127.0.0.1", port), timeout=10)
            frame = _find_metric_frame(client)
            assert frame["metric"] == "COH"
            assert frame["band"] == {"lo_bin": 15, "hi_bin": 21,
                                     "bin_hz": 1.0}
            # control round-trip while serving
            client.sendall(encode_frame(
                0x00, b'{"type":"set_metric","value":"PLI"}'))
            end = time.monotonic() + 10
            while time.monotonic() < end:
                ftype, payload = read_frame(client)
                if ftype == FRAME_ACK:
                    assert json.loads(payload)["accepted"] is True
                    break
            client.close()
            assert proc.wait(timeout=60) == 0
        finally:
            proc.kill()
        final = json.loads(out.read_text())
        assert final["n_trials"] >= 1
        # after the switch the final network is labeled with the new metric
        assert final["metric"] == "PLI"

    def test_port_in_use_exit_4(self, sim_path):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen()
        port = blocker.getsockname()[1]
        try:
            rc = main(["serve", str(sim_path), "--port", str(port),
                       "--speed", "0"])
            assert rc == 4
        finally:
            blocker.close()
