import json
import shutil
import signal
import subprocess
import time

import numpy as np
import pytest

from limrsf import ply
from limrsf.cli import main
from limrsf.geometry import PointCloud
from limrsf.protocol import encode_mesh
from limrsf.stream import fetch_once

SCENE_FLAGS = [
    "--scene", "plain",
    "--room", "1.0", "1.0", "1.0",
    "--spacing", "0.07",
    "--noise-sigma", "0.004",
    "--outliers", "20",
    "--seed", "3",
    "--hole", "0.3", "0.0", "0.3", "0.7", "0.03", "0.7",
]


@pytest.fixture
def run_cli(capsys):
    def invoke(*args: str):
        code = main(list(args))
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """scan.ply, regions.json, and mesh.ply produced by the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    assert main(
        ["scan-gen", *SCENE_FLAGS,
         "--out", str(root / "scan.ply"), "--regions", str(root / "regions.json")]
    ) == 0
    assert main(
        ["reconstruct", "--input", str(root / "scan.ply"),
         "--out", str(root / "mesh.ply"), "--depth", "5"]
    ) == 0
    return root


class TestScanGen:
    def test_writes_cloud_and_regions(self, run_cli, tmp_path):
        out = tmp_path / "scan.ply"
        regions = tmp_path / "regions.json"
        code, stdout, _ = run_cli(
            "scan-gen", *SCENE_FLAGS, "--out", str(out), "--regions", str(regions)
        )
        assert code == 0
        body = json.loads(stdout)
        assert body["points"] == len(ply.load_point_cloud(out))
        assert len(body["regions"]) == 2  # planted hole plus the open face
        assert len(json.loads(regions.read_text())) == 2

    def test_same_flags_reproduce_identical_bytes(self, run_cli, tmp_path, artifacts):
        out = tmp_path / "again.ply"
        code, _, _ = run_cli("scan-gen", *SCENE_FLAGS, "--out", str(out))
        assert code == 0
        assert out.read_bytes() == (artifacts / "scan.ply").read_bytes()

    def test_default_scene_has_the_wall_hole(self, run_cli, tmp_path):
        code, stdout, _ = run_cli(
            "scan-gen", "--spacing", "0.2", "--outliers", "0",
            "--out", str(tmp_path / "s.ply"),
        )
        assert code == 0
        assert len(json.loads(stdout)["regions"]) == 2

    def test_plain_scene_has_only_the_open_face(self, run_cli, tmp_path):
        code, stdout, _ = run_cli(
            "scan-gen", "--scene", "plain", "--spacing", "0.2", "--outliers", "0",
            "--out", str(tmp_path / "s.ply"),
        )
        assert code == 0
        assert len(json.loads(stdout)["regions"]) == 1

    def test_invalid_scene_exits_1(self, run_cli, tmp_path):
        code, _, err = run_cli(
            "scan-gen", "--spacing", "-0.1", "--out", str(tmp_path / "s.ply")
        )
        assert code == 1
        assert "error" in err


class TestReconstruct:
    def test_output_matches_response(self, run_cli, artifacts, tmp_path):
        out = tmp_path / "mesh.ply"
        code, stdout, _ = run_cli(
            "reconstruct", "--input", str(artifacts / "scan.ply"),
            "--out", str(out), "--depth", "5",
        )
        assert code == 0
        body = json.loads(stdout)
        mesh = ply.load_mesh(out)
        assert body["vertices"] == mesh.vertex_count
        assert body["highlighted"] == int(np.sum(mesh.highlight))

    def test_set_flag_is_equivalent_to_the_pinned_flag(self, run_cli, artifacts, tmp_path):
        wrote = tmp_path / "via_set.ply"
        code, _, _ = run_cli(
            "reconstruct", "--input", str(artifacts / "scan.ply"),
            "--out", str(wrote), "--set", "poisson.depth=5",
        )
        assert code == 0
        assert wrote.read_bytes() == (artifacts / "mesh.ply").read_bytes()

    def test_depth_out_of_range_exits_1(self, run_cli, artifacts, tmp_path):
        code, _, err = run_cli(
            "reconstruct", "--input", str(artifacts / "scan.ply"),
            "--out", str(tmp_path / "m.ply"), "--depth", "99",
        )
        assert code == 1
        assert "poisson.depth" in err

    def test_missing_input_exits_2(self, run_cli, tmp_path):
        code, _, _ = run_cli(
            "reconstruct", "--input", str(tmp_path / "no.ply"),
            "--out", str(tmp_path / "m.ply"),
        )
        assert code == 2

    def test_degenerate_cloud_exits_3(self, run_cli, tmp_path):
        # a plane has no interior; reconstruction must refuse, not hang
        g = np.linspace(0.0, 1.0, 12)
        xx, yy = np.meshgrid(g, g)
        points = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
        cloud = PointCloud(points=points, colors=np.full((points.shape[0], 3), 0.5))
        flat = tmp_path / "flat.ply"
        ply.save_point_cloud(cloud, flat)
        code, _, err = run_cli(
            "reconstruct", "--input", str(flat), "--out", str(tmp_path / "m.ply")
        )
        assert code == 3
        assert "error" in err

    def test_bad_set_pair_exits_1(self, run_cli, artifacts, tmp_path):
        code, _, err = run_cli(
            "reconstruct", "--input", str(artifacts / "scan.ply"),
            "--out", str(tmp_path / "m.ply"), "--set", "poisson.depth",
        )
        assert code == 1
        assert "key=value" in err


class TestSimplify:
    def test_hits_target(self, run_cli, artifacts, tmp_path):
        out = tmp_path / "small.ply"
        code, stdout, _ = run_cli(
            "simplify", "--input", str(artifacts / "mesh.ply"),
            "--out", str(out), "--target-vertices", "150",
        )
        assert code == 0
        assert json.loads(stdout)["vertices"] == 150
        assert ply.load_mesh(out).vertex_count == 150

    def test_absurd_target_exits_1(self, run_cli, artifacts, tmp_path):
        code, _, _ = run_cli(
            "simplify", "--input", str(artifacts / "mesh.ply"),
            "--out", str(tmp_path / "s.ply"), "--target-vertices", "3",
        )
        assert code == 1

    def test_corrupt_mesh_exits_2(self, run_cli, tmp_path):
        bad = tmp_path / "bad.ply"
        bad.write_bytes(b"ply\nnot really\n")
        code, _, _ = run_cli(
            "simplify", "--input", str(bad), "--out", str(tmp_path / "s.ply")
        )
        assert code == 2


class TestDetect:
    def test_both_ground_truth_modes(self, run_cli, artifacts):
        code, stdout, _ = run_cli(
            "detect", "--mesh", str(artifacts / "mesh.ply"),
            "--cloud", str(artifacts / "scan.ply"),
            "--regions", str(artifacts / "regions.json"),
        )
        assert code == 0
        body = json.loads(stdout)
        assert body["mapped_points"] > 0
        assert set(body["low_density"]) == {"tp", "fp", "fn", "precision", "recall", "f1", "iou"}
        assert body["boxes"]["tp"] > 0

    def test_regions_optional(self, run_cli, artifacts):
        code, stdout, _ = run_cli(
            "detect", "--mesh", str(artifacts / "mesh.ply"),
            "--cloud", str(artifacts / "scan.ply"),
        )
        assert code == 0
        assert json.loads(stdout)["boxes"] is None


class TestEvalBlindspots:
    def test_flag_counts(self, run_cli):
        code, stdout, _ = run_cli("eval-blindspots", "--tp", "3", "--fp", "1", "--fn", "2")
        assert code == 0
        body = json.loads(stdout)
        assert body["precision"] == 0.75
        assert body["recall"] == 0.6
        assert body["iou"] == 0.5

    def test_counts_file(self, run_cli, tmp_path):
        counts = tmp_path / "counts.json"
        counts.write_text('{"tp": 3, "fp": 1, "fn": 2}', encoding="utf-8")
        code, stdout, _ = run_cli("eval-blindspots", "--counts", str(counts))
        assert code == 0
        assert json.loads(stdout)["f1"] == pytest.approx(2 / 3)

    def test_counts_and_flags_are_exclusive(self, run_cli, tmp_path):
        counts = tmp_path / "counts.json"
        counts.write_text('{"tp": 1, "fp": 0, "fn": 0}', encoding="utf-8")
        code, _, err = run_cli(
            "eval-blindspots", "--counts", str(counts), "--tp", "1", "--fp", "0", "--fn", "0"
        )
        assert code == 1
        assert "mutually exclusive" in err

    def test_partial_flags_exit_1(self, run_cli):
        code, _, err = run_cli("eval-blindspots", "--tp", "3")
        assert code == 1
        assert "--counts FILE" in err

    def test_negative_counts_exit_1(self, run_cli):
        code, _, _ = run_cli("eval-blindspots", "--tp", "-1", "--fp", "0", "--fn", "0")
        assert code == 1

    def test_malformed_counts_file_exits_2(self, run_cli, tmp_path):
        counts = tmp_path / "counts.json"
        counts.write_text("{tp: 3", encoding="utf-8")
        assert run_cli("eval-blindspots", "--counts", str(counts))[0] == 2

    def test_missing_counts_file_exits_2(self, run_cli, tmp_path):
        assert run_cli("eval-blindspots", "--counts", str(tmp_path / "no.json"))[0] == 2


class TestEvalImages:
    def test_metrics_json(self, run_cli, tmp_path):
        a = tmp_path / "a.pgm"
        b = tmp_path / "b.pgm"
        a.write_bytes(b"P5\n16 16\n255\n" + bytes(256))
        b.write_bytes(b"P5\n16 16\n255\n" + bytes([255] * 256))
        code, stdout, _ = run_cli("eval-images", "--reference", str(a), "--test", str(b))
        assert code == 0
        body = json.loads(stdout)
        assert body["mse"] == 1.0
        assert body["psnr"] == 0.0

    def test_identical_images(self, run_cli, tmp_path):
        a = tmp_path / "a.pgm"
        a.write_bytes(b"P5\n16 16\n255\n" + bytes(range(128)) * 2)
        code, stdout, _ = run_cli("eval-images", "--reference", str(a), "--test", str(a))
        assert code == 0
        assert json.loads(stdout) == {"mse": 0.0, "psnr": "inf", "ssim": 1.0}

    def test_corrupt_image_exits_2(self, run_cli, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P9\n2 2\n255\n....")
        code, _, _ = run_cli("eval-images", "--reference", str(bad), "--test", str(bad))
        assert code == 2


class TestRun:
    def test_scene_to_artifacts(self, run_cli, tmp_path):
        out = tmp_path / "out"
        code, stdout, _ = run_cli(
            "run", *SCENE_FLAGS, "--out", str(out),
            "--depth", "5", "--target-vertices", "300",
        )
        assert code == 0
        body = json.loads(stdout)
        assert body["report"]["schema"] == 1
        assert body["detection"]["boxes"] is not None
        assert (out / "mesh.ply").is_file()
        assert (out / "simplified.ply").is_file()
        assert json.loads((out / "report.json").read_text())["simplify"]["vertices"] == 300

    def test_input_file_with_regions(self, run_cli, artifacts, tmp_path):
        code, stdout, _ = run_cli(
            "run", "--input", str(artifacts / "scan.ply"),
            "--regions", str(artifacts / "regions.json"),
            "--out", str(tmp_path / "out"), "--depth", "5",
        )
        assert code == 0
        assert json.loads(stdout)["detection"]["boxes"]["tp"] > 0

    def test_missing_input_exits_2(self, run_cli, tmp_path):
        code, _, _ = run_cli(
            "run", "--input", str(tmp_path / "no.ply"), "--out", str(tmp_path / "out")
        )
        assert code == 2


class TestTopLevel:
    def test_help_exits_0(self, run_cli):
        code, stdout, _ = run_cli("--help")
        assert code == 0
        for command in ("scan-gen", "reconstruct", "simplify", "detect",
                        "eval-blindspots", "eval-images", "serve", "run"):
            assert command in stdout

    def test_version_exits_0(self, run_cli):
        import limrsf

        code, stdout, _ = run_cli("--version")
        assert code == 0
        assert limrsf.__version__ in stdout

    def test_unknown_command_exits_1(self, run_cli):
        code, _, err = run_cli("reconstructify")
        assert code == 1
        assert "No such command" in err

    def test_unknown_flag_exits_1(self, run_cli):
        assert run_cli("simplify", "--inputs", "x")[0] == 1


def wait_for(predicate, timeout: float = 15.0) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.05)
    return False


class TestServeSubprocess:
    def test_serve_streams_and_answers_rest(self, artifacts):
        import httpx

        exe = shutil.which("limrsf")
        assert exe is not None, "console script not installed"
        tcp_port, ws_port, rest_port = 9500, 9501, 9502
        proc = subprocess.Popen(
            [exe, "serve", "--mesh", str(artifacts / "mesh.ply"),
             "--set", f"serve.tcp_port={tcp_port}", "--set", f"serve.ws_port={ws_port}",
             "--rest-port", str(rest_port), "--no-watch"],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        try:
            banner = proc.stdout.readline()
            assert f"tcp://127.0.0.1:{tcp_port}" in banner
            assert f"ws://127.0.0.1:{ws_port}" in banner

            fetched = fetch_once(("127.0.0.1", tcp_port))
            expected = encode_mesh(ply.load_mesh(artifacts / "mesh.ply"))
            assert encode_mesh(fetched) == expected

            def rest_up():
                try:
                    return httpx.get(f"http://127.0.0.1:{rest_port}/healthz").status_code == 200
                except httpx.TransportError:
                    return False

            assert wait_for(rest_up)
            status = httpx.get(f"http://127.0.0.1:{rest_port}/status").json()
            assert status["stream"]["running"] is True
            assert status["stream"]["tcp_port"] == tcp_port
            assert status["stream"]["snapshots"] == 1
        finally:
            proc.send_signal(signal.SIGINT)
            code = proc.wait(timeout=15)
        assert code == 0

    def test_serve_watch_republishes_on_change(self, artifacts, tmp_path):
        exe = shutil.which("limrsf")
        assert exe is not None, "console script not installed"
        mesh_path = tmp_path / "live.ply"
        shutil.copy(artifacts / "mesh.ply", mesh_path)
        tcp_port, rest_port = 9510, 9512
        proc = subprocess.Popen(
            [exe, "serve", "--mesh", str(mesh_path),
             "--set", f"serve.tcp_port={tcp_port}", "--set", "serve.ws_port=9511",
             "--rest-port", str(rest_port)],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        try:
            proc.stdout.readline()
            first = fetch_once(("127.0.0.1", tcp_port))
            assert first.vertex_count == ply.load_mesh(artifacts / "mesh.ply").vertex_count

            # swap in a different mesh; the watcher must pick it up
            from limrsf.simplify import simplify_mesh

            smaller = simplify_mesh(ply.load_mesh(artifacts / "mesh.ply"), 200)
            ply.save_mesh(smaller, mesh_path)

            def republished():
                return fetch_once(("127.0.0.1", tcp_port)).vertex_count == 200

            assert wait_for(republished)
        finally:
            proc.send_signal(signal.SIGINT)
            proc.wait(timeout=15)
