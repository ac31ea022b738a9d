"""
Tests for the reporting service.
"""
import pytest

from src.models.audit import AuditAction
from src.models.config import Protocol, SweepKind
from src.models.network import CombiningMode, KnowledgeMode
from src.models.sweep import CSV_COLUMNS, SweepRow, SweepTable
from src.services.audit_service import AuditService
from src.services.reporting_service import ReportingService


@pytest.fixture
def audit_service():
    """Create audit service instance for testing."""
    return AuditService()


@pytest.fixture
def reporting_service(audit_service):
    """Create reporting service instance for testing."""
    return ReportingService(audit_service=audit_service)


def make_row(r: float, protocol: Protocol, rate, **overrides) -> SweepRow:
    values = dict(
        r=r, n_relays=2, theta=4.0, snr_db=10.0, protocol=protocol,
        schedule=KnowledgeMode.FIXED_SCHEDULE, combining=CombiningMode.NON_COHERENT,
        rate_bpcu=rate, binding="1:d" if rate is not None else "failed: ValueError",
        evals=120 if rate is not None else 0, seed=0,
    )
    values.update(overrides)
    return SweepRow(**values)


@pytest.fixture
def table():
    return SweepTable(kind=SweepKind.TWO_RELAY_DISTANCE, rows=[
        make_row(-0.5, Protocol.DF, 4.12345),
        make_row(-0.5, Protocol.CUTSET, 5.5),
        make_row(0.0, Protocol.DF, None),
        make_row(0.0, Protocol.CUTSET, 6.25),
        make_row(0.5, Protocol.DF, 6.26856, schedule=KnowledgeMode.RANDOM_ACCESS),
    ])


class TestReportingService:
    """Test suite for ReportingService."""

    @pytest.mark.asyncio
    async def test_csv_header_and_precision(self, reporting_service, table, tmp_path):
        paths = await reporting_service.emit_outputs(table, str(tmp_path))
        lines = (tmp_path / "rates.csv").read_text(encoding="utf-8").splitlines()

        assert paths == [str(tmp_path / "rates.csv")]
        assert lines[0] == "r,N,theta,snr_db,protocol,schedule,combining,rate_bpcu,binding,evals,seed"
        assert lines[1] == "-0.50000,2,4,10,df,fixed,noncoherent,4.12345,1:d,120,0"
        assert lines[3] == "0.00000,2,4,10,df,fixed,noncoherent,,failed: ValueError,0,0"
        assert len(lines) == 6

    @pytest.mark.asyncio
    async def test_csv_round_trip(self, reporting_service, table, tmp_path):
        await reporting_service.emit_outputs(table, str(tmp_path))
        rows = await reporting_service.read_csv(str(tmp_path / "rates.csv"))
        assert rows == table.rows

    @pytest.mark.asyncio
    async def test_identical_tables_give_identical_files(self, reporting_service, table, tmp_path):
        await reporting_service.emit_outputs(table, str(tmp_path / "a"))
        await reporting_service.emit_outputs(table, str(tmp_path / "b"))
        assert (tmp_path / "a" / "rates.csv").read_bytes() == (tmp_path / "b" / "rates.csv").read_bytes()

    @pytest.mark.asyncio
    async def test_plot_lists_every_series(self, reporting_service, table, tmp_path):
        paths = await reporting_service.emit_outputs(table, str(tmp_path), plot=True)
        svg = (tmp_path / "rates.svg").read_text(encoding="utf-8")

        assert paths[1].endswith("rates.svg")
        assert svg.lstrip().startswith("<?xml")
        for label in ("df (fixed)", "cutset (fixed)", "df (random)"):
            assert label in svg

    def test_series_skip_failed_rows(self, reporting_service, table):
        series = reporting_service.series_of(table)
        assert series["df (fixed)"] == [(-0.5, 4.12345)]
        assert series["cutset (fixed)"] == [(-0.5, 5.5), (0.0, 6.25)]

    def test_path_loss_series_split_by_relay_count(self, reporting_service):
        table = SweepTable(kind=SweepKind.PATH_LOSS, rows=[
            make_row(0.5, Protocol.DF, 2.0, n_relays=1, theta=2.0),
            make_row(0.25, Protocol.DF, 3.0, n_relays=3, theta=2.0),
        ])
        assert set(reporting_service.series_of(table)) == {"df (fixed), N=1", "df (fixed), N=3"}

    @pytest.mark.asyncio
    async def test_outputs_are_audited(self, reporting_service, audit_service, table, tmp_path):
        await reporting_service.emit_outputs(table, str(tmp_path), plot=True)
        trail = await audit_service.get_run_trail()
        assert [e.action for e in trail] == [AuditAction.OUTPUT_WRITTEN] * 2
        assert [e.details["format"] for e in trail] == ["csv", "svg"]

    @pytest.mark.asyncio
    async def test_empty_table_rejected(self, reporting_service, tmp_path):
        with pytest.raises(ValueError, match="empty sweep table"):
            await reporting_service.emit_outputs(SweepTable(kind=SweepKind.SINGLE_POINT), str(tmp_path))

    @pytest.mark.asyncio
    async def test_unwritable_directory(self, reporting_service, table, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ValueError, match="not writable"):
            await reporting_service.emit_outputs(table, str(blocker / "out"))

    @pytest.mark.asyncio
    async def test_foreign_csv_rejected(self, reporting_service, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="Unexpected CSV header"):
            await reporting_service.read_csv(str(path))

    def test_header_constant(self):
        assert len(CSV_COLUMNS) == 11
