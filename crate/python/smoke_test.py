"""Smoke test for the dishrec_py extension.

Builds the extension with cargo unless DISHREC_PY_LIB points at an already
built library, then runs a small generate -> train -> recommend round trip.

    python3 python/smoke_test.py
"""

import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_extension(dest: Path) -> None:
    lib = os.environ.get("DISHREC_PY_LIB")
    if lib is None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "dishrec-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        lib = ROOT / "target" / "release" / "libdishrec_py.so"
    shutil.copy(lib, dest / "dishrec_py.so")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        build_extension(tmp)
        sys.path.insert(0, str(tmp))
        import dishrec_py as dr

        data = tmp / "data"
        dr.generate_corpus(str(data), seed=3, users=40)
        assert (data / "recipes.jsonl").exists()

        status = dr.run_cli(
            ["train-recommender", "--seed", "1", "--data", str(data), "--out", str(tmp / "rec"), "--epochs", "2"]
        )
        assert status == 0, status
        assert dr.run_cli(["train-mf", "--no-such-flag"]) == 2

        rec = dr.Recommender(str(tmp / "rec"), str(data))
        assert rec.n_users == 40
        recs = rec.recommend(0, top=5)
        assert recs, "user 0 should be able to cook something"
        scores = [r["score"] for r in recs]
        assert scores == sorted(scores, reverse=True)
        assert [r["rank"] for r in recs] == list(range(1, len(recs) + 1))
        assert all(r["coverage"] == 1.0 for r in recs)
        assert abs(rec.score(0, recs[0]["recipe"]) - recs[0]["score"]) < 1e-12
        try:
            rec.recommend(0, ingredients=["unobtainium"])
        except ValueError as e:
            assert "unobtainium" in str(e)
        else:
            raise AssertionError("unknown ingredient accepted")

        assert dr.run_cli(
            ["train-profiler", "--seed", "1", "--data", str(data), "--out", str(tmp / "prof"), "--epochs", "1"]
        ) == 0
        prof = dr.Profiler(str(tmp / "prof"))
        probs = prof.probabilities(["kw_insomnia_0", "tea"])
        assert len(probs) == 8 and all(0.0 < p < 1.0 for p in probs)
        assert set(prof.predict_tags(["kw_insomnia_0"])) <= set(range(8))

        assert dr.hr_at_k([3, 1, 2], 1, 2) == 1.0
        assert dr.ndcg_at_k([3, 4, 1], 1, 3) == 0.5
        assert abs(dr.auc(0.7, [0.9, 0.5, 0.5]) - 2 / 3) < 1e-12
        checks = dr.grad_check(5)
        assert checks and all(ok for _, _, ok in checks), checks

        try:
            dr.Recommender(str(tmp / "missing"), str(data))
        except OSError:
            pass
        else:
            raise AssertionError("missing checkpoint accepted")
    print("python smoke test: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
