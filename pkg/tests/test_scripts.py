import pathlib
import subprocess
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]


def run(*args, cwd=None):
    return subprocess.run([sys.executable, *args], check=True, capture_output=True,
                          text=True, cwd=cwd)


def test_quadratic_dominance_runs():
    out = run(str(ROOT / "scripts" / "quadratic_dominance.py"), "--trials", "2").stdout
    assert len(out.strip().splitlines()) == 4


def test_figure_sweep_runs(tmp_path):
    run(str(ROOT / "scripts" / "figure_sweep.py"), "--config", str(ROOT / "configs" / "desk.toml"),
        "--trials", "1", "--no-baselines", "--out-dir", str(tmp_path))
    files = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert files == ["sweep_b1_L1.csv", "sweep_b1_L2.csv", "sweep_b3_L1.csv", "sweep_b3_L2.csv"]
    assert (tmp_path / "sweep_b1_L1.csv").read_text().startswith(
        "N,K,kappa_br,method,metric,mean,stderr,trials,failures\n")
