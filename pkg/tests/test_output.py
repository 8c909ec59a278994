import numpy as np
import pytest

from phibranch.catalog import make_example
from phibranch.continuation import Branch, DomainSpec, trace_all
from phibranch.errors import IoError
from phibranch.model import PeriodicGrid, SolutionPair, StatePair, norms
from phibranch.output import (
    CSV_COLUMNS,
    branch_csv_text,
    diagram_svg_text,
    read_branch_csv,
    render_diagram_svg,
    write_branch_csv,
    write_solution_csv,
)
from phibranch.phi import PhiOperator
from phibranch.continuation import Termination, TerminationKind

HEADER = "index,lambda,sup_x,sup_xprime,c1_norm,residual,arclength,flags"


@pytest.fixture(scope="module")
def ex53_run():
    ex = make_example("ex53")
    spec = DomainSpec.for_problem(ex.problem)
    _, branches = trace_all(ex.problem, ex.phi, spec, ex.monitors, grid=PeriodicGrid(16, ex.problem.period))
    return ex, spec, branches


def _single_point_branch():
    grid = PeriodicGrid(8, 1.0)
    pair = SolutionPair(0.0, StatePair.zeros(grid, 2), 0.0, 0.0)
    end = Termination(TerminationKind.STEP_FAILURE)
    return Branch((pair,), 0, (0.0,), ((),), end, end, phi=PhiOperator.identity())


def test_single_point_csv(tmp_path):
    path = write_branch_csv(_single_point_branch(), tmp_path / "b.csv")
    lines = path.read_text().splitlines()
    assert lines == [HEADER, "0,0,0,0,0,0,0,"]
    assert ",".join(CSV_COLUMNS) == HEADER


def test_empty_branch_rejected(tmp_path):
    b = _single_point_branch()
    empty = Branch((), 0, (), (), b.termination, b.termination, phi=b.phi)
    with pytest.raises(IoError):
        write_branch_csv(empty, tmp_path / "e.csv")
    assert not (tmp_path / "e.csv").exists()


def test_round_trip(ex53_run, tmp_path):
    ex, _, branches = ex53_run
    b = branches[0]
    table = read_branch_csv(write_branch_csv(b, tmp_path / "b.csv"))
    assert len(table) == len(b)
    np.testing.assert_array_equal(table.lambdas, b.lambdas)
    np.testing.assert_array_equal(table.c1_norms, b.c1_norms)
    np.testing.assert_array_equal(table.arclengths, np.array(b.arclengths))
    sup_x = [norms(p.state, ex.phi).sup_x for p in b.points]
    np.testing.assert_array_equal(table.sup_x, sup_x)
    assert all(f == () for f in table.flags)


def test_flags_column(tmp_path):
    b = _single_point_branch()
    flagged = Branch(b.points, 0, b.arclengths, (("a", "b"),), b.termination, b.termination, phi=b.phi)
    text = branch_csv_text(flagged)
    assert text.splitlines()[1].endswith(",a;b")
    (tmp_path / "f.csv").write_text(text)
    assert read_branch_csv(tmp_path / "f.csv").flags == (("a", "b"),)


def test_read_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(IoError):
        read_branch_csv(bad)
    bad.write_text(HEADER + "\n0,1,2\n")
    with pytest.raises(IoError):
        read_branch_csv(bad)
    bad.write_text(HEADER + "\n0,x,0,0,0,0,0,\n")
    with pytest.raises(IoError):
        read_branch_csv(bad)
    with pytest.raises(IoError):
        read_branch_csv(tmp_path / "missing.csv")


def test_svg_guides_ex53(ex53_run, tmp_path):
    _, spec, branches = ex53_run
    path = render_diagram_svg(branches, spec, tmp_path / "d.svg")
    text = path.read_text()
    assert text.startswith("<?xml") and text.rstrip().endswith("</svg>")
    guides = [line for line in text.splitlines() if "guide-interval" in line]
    assert len(guides) == 2
    assert 'data-lambda="-1"' in guides[0] and 'data-lambda="1"' in guides[1]
    assert all('stroke-dasharray="6,4"' in g for g in guides)
    assert "guide-ceiling" in text and text.count('class="branch"') == 1
    assert ">λ<" in text and "C¹" in text
    # deterministic
    assert render_diagram_svg(branches, spec, tmp_path / "e.svg").read_bytes() == path.read_bytes()


def test_svg_lambda_hat_guides():
    ex = make_example("ex52")
    b = _single_point_branch()
    b = Branch(b.points, 0, b.arclengths, b.flags, b.termination, b.termination, ex.monitors, phi=b.phi)
    text = diagram_svg_text([b])
    assert text.count("guide-lambda-hat") == 2
    assert "guide-interval" not in text


def test_svg_ex51_reaches_right_edge():
    ex = make_example("ex51")
    spec = DomainSpec.for_problem(ex.problem, window=(-3.0, 3.0))
    _, branches = trace_all(ex.problem, ex.phi, spec, ex.monitors, grid=PeriodicGrid(16, ex.problem.period))
    text = diagram_svg_text(branches, spec.c1_ceiling)
    line = next(line for line in text.splitlines() if 'class="branch"' in line)
    xs = [float(p.split(",")[0]) for p in line.split('points="')[1].split('"')[0].split()]
    lams = branches[0].lambdas
    assert np.all(np.diff(lams) > 0)
    assert max(xs) == pytest.approx(640 - 20, abs=1e-3)


def test_svg_empty(tmp_path):
    with pytest.raises(IoError):
        render_diagram_svg([], None, tmp_path / "x.svg")
    assert not (tmp_path / "x.svg").exists()


def test_solution_csv(tmp_path):
    grid = PeriodicGrid(8, 1.0)
    phi = PhiOperator.power_radial(2)
    xp = np.full((8, 1), 2.0)
    pair = SolutionPair(0.0, StatePair.from_position(grid, np.ones((8, 1)), xp, phi), 0.0, 3.0)
    lines = write_solution_csv(pair, phi, tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,x_1,xprime_1"
    assert lines[2] == "0.125,1,2"
