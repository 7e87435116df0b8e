import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from vmon import cli
from vmon.bench import BenchReport
from test_bench import small_report


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestArgs:
    def test_size_parse(self):
        assert cli.parse_size("800x450") == (800, 450)

    def test_zero_size_is_usage_error(self):
        assert cli.main(["bench", "e2e", "--size", "0x0"]) == 2

    def test_garbage_size_is_usage_error(self):
        assert cli.main(["bench", "e2e", "--size", "big"]) == 2

    def test_unknown_flag_is_usage_error(self, capsys):
        assert cli.main(["serve", "--warp-speed"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_missing_command_is_usage_error(self):
        assert cli.main([]) == 2

    def test_missing_report_input_is_runtime_error(self, tmp_path):
        assert cli.main(["report", "--in", str(tmp_path / "none.json")]) == 1


class TestReportCommand:
    def test_render_saved_report(self, tmp_path, capsys):
        path = tmp_path / "report_e2e.json"
        path.write_text(small_report().to_json())
        assert cli.main(["report", "--in", str(path), "--format", "text"]) == 0
        out = capsys.readouterr().out
        assert "end_to_end" in out and "214 (30)" in out

    def test_csv_to_file(self, tmp_path):
        src = tmp_path / "report_e2e.json"
        src.write_text(small_report().to_json())
        dst = tmp_path / "out.csv"
        assert cli.main(["report", "--in", str(src), "--format", "csv",
                         "--out", str(dst)]) == 0
        assert dst.read_text().startswith("metric,size,unit")


class TestFixturesCommand:
    def test_writes_vectors(self, tmp_path, capsys):
        out = tmp_path / "vectors.json"
        assert cli.main(["fixtures", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["vectors"]) >= 50
        assert doc["tolerance"] == 1e-6


class TestConfigFile:
    def test_flags_override_config(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"duration": 99, "quality": 10, "rate": 5}))

        class Args:
            size = (640, 480)
            sizes = None
            source_size = None
            duration = 6.0  # flag wins over config's 99
            rate = None
            quality = None
            seed = None

        cfg = cli._bench_config(Args(), json.load(open(cfg_path)))
        assert cfg.duration_s == 6.0
        assert cfg.quality == 10  # config wins over default
        assert cfg.rate_hz == 5

    def test_config_must_be_object(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1,2,3]")
        assert cli.main(["--config", str(path), "fixtures", "--out",
                         str(tmp_path / "v.json")]) == 1


class TestBenchCommand:
    def test_e2e_writes_reports_and_exits_zero(self, tmp_path, capsys):
        code = cli.main([
            "bench", "e2e", "--size", "640x480", "--source-size", "960x540",
            "--duration", "5", "--quality", "85", "--out", str(tmp_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "End-to-end delay report" in out
        report = BenchReport.from_json((tmp_path / "report_e2e.json").read_text())
        assert report.kind == "e2e"
        assert (tmp_path / "report_e2e.txt").exists()
        assert (tmp_path / "report_e2e.csv").exists()


@pytest.mark.slow
class TestServeViewSmoke:
    def test_live_stats_within_two_seconds(self, tmp_path):
        port = free_port()
        http_port = free_port()
        env_cmd = [sys.executable, "-m", "vmon"]
        serve = subprocess.Popen(
            env_cmd + ["serve", "--size", "640x480", "--source-size", "960x540",
                       "--rate", "36", "--quality", "85", "--port", str(port),
                       "--http-port", str(http_port), "--duration", "20"],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
            cwd=str(Path(__file__).parent.parent))
        try:
            banner = serve.stdout.readline()
            assert "stream:" in banner
            view = subprocess.run(
                env_cmd + ["view", "--connect", f"127.0.0.1:{port}", "--duration", "3"],
                capture_output=True, text=True, timeout=30,
                cwd=str(Path(__file__).parent.parent))
            assert view.returncode == 0, view.stderr
            lines = [l for l in view.stdout.strip().split("\n") if l]
            # periodic live lines appeared, then a final JSON document
            assert any(l.startswith("received=") for l in lines[:2]), lines
            final = json.loads(lines[-1])
            assert final["counters"]["frames_received"] > 0
            assert final["stats"]["reception_rate_hz"]["mean"] > 0

            # gateway endpoints are alive in the same process
            import urllib.request
            with urllib.request.urlopen(
                    f"http://127.0.0.1:{http_port}/health", timeout=5) as resp:
                assert resp.read() == b"ok"
            with urllib.request.urlopen(
                    f"http://127.0.0.1:{http_port}/stats", timeout=5) as resp:
                stats = json.loads(resp.read())
            assert stats["counters"]["frames_emitted"] > 0
        finally:
            serve.terminate()
            serve.wait(timeout=10)
