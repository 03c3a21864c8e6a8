import argparse
import json

import pytest

from promptbot.backends import EchoBackend, LookupBackend, RemoteBackend, UniformBackend
from promptbot.cli import build_parser, main, make_backend
from promptbot.errors import ConfigurationError


def ns(**kwargs):
    return argparse.Namespace(**kwargs)


class TestMakeBackend:
    def test_uniform(self):
        backend = make_backend(ns(backend=None, mock="uniform:7"))
        assert isinstance(backend, UniformBackend)
        assert backend.score("a", "b").total_logprob == pytest.approx(-__import__("math").log(7))

    def test_uniform_default_vocab(self):
        backend = make_backend(ns(backend=None, mock="uniform"))
        assert isinstance(backend, UniformBackend)

    def test_echo_from_file(self, tmp_path):
        script = tmp_path / "script.json"
        script.write_text(json.dumps({"UserB:": "hey"}))
        backend = make_backend(ns(backend=None, mock=f"echo:{script}"))
        assert isinstance(backend, EchoBackend)

    def test_lookup_from_file(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "table": {"": {"a": 0.5}},
            "generations": {"q": "a"},
            "default_prob": 0.001,
        }))
        backend = make_backend(ns(backend=None, mock=f"lookup:{spec}"))
        assert isinstance(backend, LookupBackend)

    def test_remote_url_wins(self):
        backend = make_backend(ns(backend="http://127.0.0.1:9", mock="uniform"))
        assert isinstance(backend, RemoteBackend)

    def test_unknown_mock_rejected(self):
        with pytest.raises(ConfigurationError):
            make_backend(ns(backend=None, mock="banana:1"))

    def test_no_backend_rejected(self):
        with pytest.raises(ConfigurationError):
            make_backend(ns(backend=None, mock=None))


class TestParserShape:
    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["eval", "--task", "dd", "--out", "r.json"])
        assert args.shots == "0,1" and args.runs == 3 and args.seed == 42
        args = parser.parse_args(["serve", "--port", "9000"])
        assert args.host == "127.0.0.1" and not args.acknowledge_remote

    def test_command_required(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestEvalCommand:
    def test_end_to_end_and_deterministic(self, tmp_path, capsys):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            code = main([
                "eval", "--task", "dd", "--shots", "0,1", "--runs", "2",
                "--mock", "uniform:50", "--out", str(out),
            ])
            assert code == 0
            outs.append(out.read_text())
            assert (tmp_path / f"{name}.progress.jsonl").exists()
        assert outs[0] == outs[1]
        report = json.loads(outs[0])
        assert list(report["shots"]) == ["0", "1"]
        assert capsys.readouterr().out.count('"task": "dd"') >= 1

    def test_unknown_task_exits_2(self, tmp_path, capsys):
        code = main(["eval", "--task", "zzz", "--mock", "uniform",
                     "--out", str(tmp_path / "r.json")])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestParseCommand:
    def test_wow_parse_over_jsonl(self, tmp_path, capsys):
        dialogue = {
            "id": "x1",
            "task": "wow_parse",
            "turns": [{"speaker": "user", "text": "Do you shop at Target?"}],
        }
        infile = tmp_path / "in.jsonl"
        infile.write_text(json.dumps(dialogue) + "\n")
        script = tmp_path / "script.json"
        script.write_text(json.dumps({"Search:": "Target Corporation"}))
        outfile = tmp_path / "out.jsonl"

        code = main([
            "parse", "--task", "wow", "--in", str(infile), "--out", str(outfile),
            "--mock", f"echo:{script}",
        ])
        assert code == 0
        record = json.loads(outfile.read_text())
        assert record["task"] == "wow_parse"
        assert record["kind"] == "title_query"
        assert record["payload"] == "Target Corporation"
        assert "wrote 1 parses" in capsys.readouterr().out


class TestSelectSkillCommand:
    def test_ranks_and_reports(self, tmp_path, capsys):
        prompts = tmp_path / "prompts"
        prompts.mkdir()
        (prompts / "alpha.txt").write_text("Dialogue:\nUser: hello\nAssistant: hi\n")
        (prompts / "beta.txt").write_text("Dialogue:\nUser: bye\nAssistant: later\n")
        history = tmp_path / "history.jsonl"
        history.write_text(json.dumps({
            "id": "h1", "task": "chat",
            "turns": [{"speaker": "user", "text": "hello there"}],
        }) + "\n")
        report = tmp_path / "report.json"

        code = main([
            "select-skill", "--history", str(history), "--prompts", str(prompts),
            "--mock", "uniform:50", "--report", str(report),
        ])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "alpha"  # uniform scores tie; first registered wins
        assert [l.split("\t")[0] for l in lines[1:]] == ["alpha", "beta"]
        saved = json.loads(report.read_text())
        assert saved["label"] == "alpha" and set(saved["scores"]) == {"alpha", "beta"}

    def test_eval_samples_mode(self, tmp_path, capsys):
        prompts = tmp_path / "prompts"
        prompts.mkdir()
        (prompts / "alpha.txt").write_text("Dialogue:\nUser: hello\nAssistant: hi\n")
        (prompts / "beta.txt").write_text("Dialogue:\nUser: bye\nAssistant: later\n")
        samples = tmp_path / "samples.jsonl"
        rows = [
            {"id": "s1", "task": "alpha",
             "turns": [{"speaker": "user", "text": "hello there"}]},
            {"id": "s2", "task": "beta",
             "turns": [{"speaker": "user", "text": "bye now"}]},
        ]
        samples.write_text("".join(json.dumps(r) + "\n" for r in rows))

        code = main([
            "select-skill", "--prompts", str(prompts), "--eval-samples", str(samples),
            "--mock", "uniform:50",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["accuracy"] == 0.5  # ties always pick alpha
        assert "confusion" in payload and "macro_f1" in payload
