"""Full pipeline via the adapter equals the same pipeline via a file.

Drives the seasonal-ads CLI as a subprocess (its external interface) with
embeddings served by a live adapter process, then reruns it from the
embedding file the first run cached, and compares the eval reports
metric-for-metric.
"""

import json
import socket
import subprocess
import sys
import time

import pytest
import requests

ADS_PER_CLASS = 20


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def write_inputs(root):
    """Corpus, calendar, and label files in the pipeline's documented formats."""
    corpus = root / "corpus.jsonl"
    labels = root / "labels.jsonl"
    with open(corpus, "w") as cf, open(labels, "w") as lf:
        for i in range(ADS_PER_CLASS * 2):
            seasonal = i < ADS_PER_CLASS
            ad = {
                "id": f"ad{i:03d}",
                "title": "Valentine chocolate hearts" if seasonal else "Garden tools",
                "body": f"unique body {i}",
                "image_ref": None,
                "locale": "en-US",
                "created_at": "2023-02-01T00:00:00Z",
            }
            cf.write(json.dumps(ad) + "\n")
            label = {
                "ad_id": ad["id"],
                "event_id": "valentines_day" if seasonal else "none",
                "source": "keyword",
                "confidence": 1.0,
                "labeled_at": "2023-02-01T00:00:00Z",
            }
            lf.write(json.dumps(label) + "\n")
    calendar = root / "calendar.json"
    calendar.write_text(
        json.dumps(
            {
                "events": [
                    {
                        "event_id": "valentines_day",
                        "display_name": "Valentine's Day",
                        "date_rule": {"fixed": [2, 14]},
                        "duration_days": 7,
                        "primary_keywords": ["valentine"],
                        "definition_text": "Valentine's Day romance.",
                    }
                ]
            }
        )
    )
    return corpus, calendar, labels


def write_config(root, corpus, calendar, labels, text_source, work_dir) -> str:
    config = {
        "paths": {
            "corpus": str(corpus),
            "calendar": str(calendar),
            "labels": str(labels),
            "work_dir": str(work_dir),
            "manifest": str(work_dir / "manifest.jsonl"),
        },
        "embeddings": {"text": text_source},
        "build": {"seed": 3},
        "train": {"seed": 3, "epochs": 12, "hidden_sizes": [16], "batch_size": 16},
    }
    path = root / f"config_{work_dir.name}.json"
    path.write_text(json.dumps(config, indent=2))
    return str(path)


def run_cli(config: str, command: str) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "seasonal_ads.cli", "--config", config, command],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, f"{command} failed:\n{proc.stdout}\n{proc.stderr}"


@pytest.fixture
def adapter_url():
    port = free_port()
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "embed_adapter",
            "--mode", "deterministic", "--dim", "16",
            "--model-id", "det-16", "--port", str(port),
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        for _ in range(100):
            try:
                if requests.get(f"{url}/healthz", timeout=1).status_code == 200:
                    break
            except requests.RequestException:
                time.sleep(0.1)
        else:
            raise RuntimeError("adapter did not become healthy")
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_adapter_run_equals_file_run(tmp_path, adapter_url):
    corpus, calendar, labels = write_inputs(tmp_path)

    # run A: embeddings fetched live from the adapter, cached to a file
    cache = tmp_path / "cache.emb"
    work_a = tmp_path / "via_adapter"
    config_a = write_config(
        tmp_path, corpus, calendar, labels,
        {"provider": adapter_url, "cache": str(cache), "model_id": "det-16"},
        work_a,
    )
    for command in ("build-dataset", "train", "eval"):
        run_cli(config_a, command)
    assert cache.exists()
    header = cache.read_text().splitlines()[0].split()
    assert header == ["text", "16", "det-16"]

    # run B: the exact vectors run A used, loaded from the cached file
    work_b = tmp_path / "via_file"
    config_b = write_config(
        tmp_path, corpus, calendar, labels, {"file": str(cache)}, work_b
    )
    for command in ("build-dataset", "train", "eval"):
        run_cli(config_b, command)

    report_a = json.loads((work_a / "eval_report.json").read_text())
    report_b = json.loads((work_b / "eval_report.json").read_text())
    assert report_a == report_b  # metric-for-metric
    assert (work_a / "model.bin").read_bytes() == (work_b / "model.bin").read_bytes()
    print(
        f"[criterion 13] PASS adapter-run macro-F1 {report_a['macro_f1']:.4f} "
        "== file-run, model bytes identical"
    )
