import time

import pytest

from afx.phantom import (BranchSpec, FlapSpec, PhantomSpec, TearSpec, Trajectory, generate,
                         sample_suite)
from afx.report import analyze_volume
from afx.volume_io import LabelSchema, SchemaEntry, VoxelSpacing

SUITE_SIZE = 50
SUITE_SEED = 0

ONE_MM = VoxelSpacing(1.0, 1.0, 1.0)


def minimal_schema(extra=()):
    entries = [
        SchemaEntry(0, "background", "background"),
        SchemaEntry(1, "true-lumen", "true_lumen"),
        SchemaEntry(2, "false-lumen", "false_lumen"),
        SchemaEntry(3, "intimal-flap", "intimal_flap"),
    ]
    return LabelSchema(tuple(entries) + tuple(extra))


def straight_spec(tears=((60.0, 8.0),), span=180.0, radius=15.0, length=100.0, **kw):
    """Straight tube with a flap on a diameter (TL = half disk) unless ``span`` says otherwise."""
    return PhantomSpec(
        ONE_MM,
        Trajectory("straight", length=length),
        ((0.0, radius), (length, radius)),
        flap=FlapSpec(((0.0, 90.0), (length, 90.0)), ((0.0, span), (length, span))),
        tears=tuple(TearSpec(s, d) for s, d in tears),
        **kw,
    )


def intact_tube_spec(radius=12.0, length=80.0):
    return PhantomSpec(ONE_MM, Trajectory("straight", length=length),
                       ((0.0, radius), (length, radius)), name="intact-tube")


def arch_spec(name="arch-case"):
    """Candy-cane with three arch branches: static, dynamic and mixed involvement."""
    traj = Trajectory("candy-cane", ascending=45.0, arc_radius=32.0, descending=120.0)
    a0, a1 = traj.arc_range
    total = traj.total_length
    at = lambda f: a0 + f * (a1 - a0)   # noqa: E731
    return PhantomSpec(
        ONE_MM,
        traj,
        ((0.0, 13.0), (total, 12.0)),
        flap=FlapSpec(((0.0, 180.0), (total, 180.0)), ((0.0, 90.0), (total, 90.0)),
                      half_width=0.6),
        tears=(TearSpec(25.0, 8.0), TearSpec(200.0, 5.0)),
        branches=(
            BranchSpec("brachiocephalic_trunk", "arch", at(0.25), 180.0, 4.5, 25.0, "TL",
                       flap_into_branch=True, expected_zone=0),
            BranchSpec("left_common_carotid", "arch", at(0.45), 135.0, 4.0, 25.0, "both",
                       expected_zone=1),
            BranchSpec("left_subclavian", "arch", at(0.65), 255.0, 4.0, 25.0, "FL",
                       flap_into_branch=True, expected_zone=2),
        ),
        seed=7,
        name=name,
    )


@pytest.fixture(scope="session")
def straight_case():
    spec = straight_spec(name="straight-tube")
    vol, schema, truth = generate(spec)
    return spec, vol, schema, truth


@pytest.fixture(scope="session")
def arch_case():
    spec = arch_spec()
    vol, schema, truth = generate(spec)
    return spec, vol, schema, truth


@pytest.fixture(scope="session")
def arch_report(arch_case):
    _, vol, schema, _ = arch_case
    return analyze_volume(vol, schema, case_id="arch-case")


@pytest.fixture(scope="session")
def suite_specs():
    return sample_suite(SUITE_SIZE, SUITE_SEED)


@pytest.fixture(scope="session")
def suite_results(suite_specs):
    """Every suite phantom generated and analyzed once; volumes are not kept."""
    out = []
    t0 = time.perf_counter()
    for spec in suite_specs:
        vol, schema, truth = generate(spec)
        report = analyze_volume(vol, schema, case_id=spec.name)
        out.append((spec, truth, report))
    elapsed = time.perf_counter() - t0
    print(f"\nsuite of {len(out)} phantoms generated and analyzed in {elapsed:.1f} s")
    return out


# ------------------------------------------------------------ acceptance

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for a criterion, then assert on it."""
    def record(number, title, checks: dict, detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" | {detail}"
        if failed:
            line += f" | failed: {', '.join(failed)}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
