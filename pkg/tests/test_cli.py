"""
Tests for the command line interface and its exit codes.
"""
import json

import pytest

from src.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from src.exceptions import InfeasibleSearchError
from src.rate_agent import RelayRateAgent


@pytest.fixture
def relay_count_config(tmp_path):
    path = tmp_path / "relays.cfg"
    path.write_text(
        "kind = relay_count\n"
        "protocols = single_hop, cutset\n"
        "normalize_power = true\n"
        "stop = 2\n",
        encoding="utf-8",
    )
    return str(path)


class TestRateCommand:
    """`rate` subcommand."""

    def test_single_hop(self, capsys):
        assert main(["rate", "single_hop"]) == EXIT_OK
        assert "rate_bpcu=3.45943" in capsys.readouterr().out

    def test_overrides_apply(self, capsys):
        assert main(["rate", "single_hop", "--snr-db", "20"]) == EXIT_OK
        assert "rate_bpcu=6.65821" in capsys.readouterr().out

    def test_unknown_protocol(self, capsys):
        assert main(["rate", "amplify_forward"]) == EXIT_INVALID
        assert "valid protocols" in capsys.readouterr().err

    def test_protocol_precondition(self, capsys):
        assert main(["rate", "combined", "--n-relays", "1"]) == EXIT_INVALID
        assert "exactly 2 relays" in capsys.readouterr().err

    def test_random_schedule_for_cf_rejected(self, capsys):
        assert main(["rate", "cf", "--schedule", "random"]) == EXIT_INVALID
        assert "requires a fixed schedule" in capsys.readouterr().err

    def test_invalid_override(self, capsys):
        assert main(["rate", "df", "--theta", "-1"]) == EXIT_INVALID

    def test_numerical_failure(self, capsys, monkeypatch):
        async def infeasible(self, protocol, spec):
            raise InfeasibleSearchError("No feasible point found for df")

        monkeypatch.setattr(RelayRateAgent, "compute_rate", infeasible)
        assert main(["rate", "df"]) == EXIT_NUMERICAL
        assert "No feasible point" in capsys.readouterr().err

    def test_json_logs(self, capsys):
        assert main(["--log-json", "rate", "single_hop"]) == EXIT_OK
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith('{"')]
        assert records
        assert {"name", "levelname", "message"} <= set(records[0])


class TestSweepCommand:
    """`sweep` subcommand."""

    def test_writes_csv_and_plot(self, relay_count_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["sweep", "relay_count", "--config", relay_count_config, "--out", str(out), "--plot"])

        assert code == EXIT_OK
        lines = (out / "rates.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 7
        assert lines[1].startswith("1.00000,0,4,10,single_hop_normalized,fixed,noncoherent,3.45943,")
        assert (out / "rates.svg").exists()
        assert "6 rows written" in capsys.readouterr().out

    def test_byte_identical_reruns(self, relay_count_config, tmp_path):
        for name in ("first", "second"):
            assert main(["sweep", "relay_count", "--config", relay_count_config, "--out", str(tmp_path / name)]) == EXIT_OK
        assert (tmp_path / "first" / "rates.csv").read_bytes() == (tmp_path / "second" / "rates.csv").read_bytes()

    def test_missing_config(self, tmp_path, capsys):
        code = main(["sweep", "relay_count", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)])
        assert code == EXIT_INVALID
        assert "Cannot read config file" in capsys.readouterr().err

    def test_bad_config_line(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("kind = relay_count\nstep = -1\n", encoding="utf-8")
        assert main(["sweep", "relay_count", "--config", str(path), "--out", str(tmp_path)]) == EXIT_INVALID
        assert "line 2" in capsys.readouterr().err

    def test_unknown_kind_is_usage_error(self, relay_count_config, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["sweep", "spiral", "--config", relay_count_config, "--out", str(tmp_path)])
        assert info.value.code == 2


@pytest.mark.integration
class TestSelftestCommand:
    """`selftest` subcommand."""

    def test_passes(self, capsys):
        assert main(["selftest"]) == EXIT_OK
        assert "0 failed" in capsys.readouterr().out
