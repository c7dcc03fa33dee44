"""Acceptance gate: ten checks, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines;
each test also fails loudly through its assertion. The planted dataset and
all seeds are pinned, so the outcomes are reproducible bit for bit.
"""

import itertools
import json
import math
import time
from collections import Counter

import numpy as np
import pytest
from click.testing import CliRunner

from helpers import cat_col, num_col
from tabinsight import metrics, session as sessions
from tabinsight.classes import CLASS_SPECS, DESCENDING, resolve_class
from tabinsight.cli import _pairwise_phase_times, main
from tabinsight.dataset import (
    CATEGORICAL,
    NUMERIC,
    Column,
    Dataset,
    MomentSummary,
    fingerprint,
    head,
)
from tabinsight.engine import Engine
from tabinsight.errors import FingerprintMismatch
from tabinsight.query import InsightQuery, rank_insights
from tabinsight.sketch.frequent import build_frequent_items, estimated_rel_freq
from tabinsight.sketch.hyperplane import (
    HyperplaneConfig,
    build_hyperplane,
    build_hyperplane_many,
    estimate_all_pairs,
    estimate_correlation,
    finalize,
    hamming,
    merge_hyperplane,
)
from tabinsight.synth import generate, parse_plant, planted_pairs

K = 256
ACCURACY_SEEDS = 100
CONSISTENCY_SEEDS = 200

PLANTS = [
    "rho:0.9:b0,b1,b2,b3,b4",
    "rho:0.6:c0,c1,c2,c3",
    "rho:0.3:d0,d1,d2",
    "rho:0:e0,e1",
    "rho:0:e2,e3",
    "rho:0:e4,e5",
    "rho:0:e6,e7",
]


def report(name: str, ok: bool, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{suffix}")
    assert ok, f"{name}{suffix}"


def close(a: float, b: float, rel: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


@pytest.fixture(scope="module")
def planted():
    """n=10,000 rows, 20 numeric columns, 23 planted pairs at four levels."""
    specs = [parse_plant(p) for p in PLANTS]
    ds, truth = generate(10_000, 20, specs, seed=417, name="planted")
    cols = ds.numeric_columns()
    index = {c.name: i for i, c in enumerate(cols)}
    pairs = []
    for a, b, rho in planted_pairs(truth):
        exact = metrics.pearson(ds.column(a), ds.column(b)).value
        pairs.append((index[a], index[b], rho, exact))
    assert len(cols) == 20 and len(pairs) == 23
    return ds, cols, pairs


@pytest.fixture(scope="module")
def sweep(planted):
    """Per-seed Hamming shares for planted pairs plus each seed's top-10 set."""
    ds, cols, pairs = planted
    names = [c.name for c in cols]
    hk = np.empty((CONSISTENCY_SEEDS, len(pairs)))
    top10 = []
    all_ij = list(itertools.combinations(range(len(cols)), 2))
    for seed in range(CONSISTENCY_SEEDS):
        cfg = HyperplaneConfig(k=K, seed=seed)
        vectors = [finalize(s) for s in build_hyperplane_many(cols, cfg)]
        for p, (i, j, _, _) in enumerate(pairs):
            hk[seed, p] = hamming(vectors[i], vectors[j]) / K
        est = estimate_all_pairs(vectors)
        ranked = sorted(
            all_ij,
            key=lambda ij: (
                -abs(est[ij[0], ij[1]]),
                tuple(sorted((names[ij[0]], names[ij[1]]))),
            ),
        )
        top10.append({frozenset(ij) for ij in ranked[:10]})
    return hk, top10


def test_sketch_accuracy(planted):
    ds, cols, pairs = planted
    started = time.perf_counter()
    hits = total = 0
    for seed in range(ACCURACY_SEEDS):
        cfg = HyperplaneConfig(k=K, seed=seed)
        vectors = [finalize(s) for s in build_hyperplane_many(cols, cfg)]
        for i, j, _, exact in pairs:
            est = estimate_correlation(vectors[i], vectors[j])
            hits += abs(est - exact) <= 0.15
            total += 1
    elapsed = time.perf_counter() - started
    fraction = hits / total
    report(
        "sketch accuracy",
        fraction >= 0.90 and elapsed < 60.0,
        f"{fraction:.3f} of {total} combos within 0.15, {elapsed:.1f}s",
    )


def test_angle_consistency(planted, sweep):
    _, _, pairs = planted
    hk, _ = sweep
    worst = 0.0
    ok = True
    for p, (_, _, _, exact) in enumerate(pairs):
        target = math.acos(exact) / math.pi
        se = math.sqrt(target * (1.0 - target) / (K * CONSISTENCY_SEEDS))
        dev = abs(hk[:, p].mean() - target) / se
        worst = max(worst, dev)
        ok = ok and dev <= 3.0
    report("angle consistency", ok, f"worst deviation {worst:.2f} SE over 23 pairs")


def test_speedup():
    specs = []
    ds, _ = generate(100_000, 100, specs, seed=99, name="bench")
    timing = _pairwise_phase_times(ds, K, seed=0)
    ratio = timing["exact_seconds"] / max(timing["sketch_seconds"], 1e-12)
    if ratio >= 3.0:
        report("speedup", True, f"{ratio:.1f}x at n=100000, d=100")
        return
    # fallback: exact grows with n while the sketch phase stays flat
    rows = [_pairwise_phase_times(head(ds, n), K, seed=0) for n in (25_000, 50_000, 100_000)]
    exact = [r["exact_seconds"] for r in rows]
    flat = [r["sketch_seconds"] for r in rows]
    mean_flat = sum(flat) / len(flat)
    grows = exact[0] < exact[1] < exact[2]
    is_flat = all(abs(t - mean_flat) <= 0.2 * mean_flat for t in flat)
    report(
        "speedup",
        grows and is_flat,
        f"ratio {ratio:.1f}x; fallback grows={grows} flat={is_flat}",
    )


def test_merge_equivalence():
    rng = np.random.default_rng(4242)
    checked = 0
    for _ in range(50):
        n = int(rng.integers(60, 1200))
        base = rng.normal(size=n)
        if rng.random() < 0.3:
            base = np.round(base * 4.0)  # heavy ties touch the >= 0 rule
        valid = rng.random(n) >= 0.1
        col = num_col(np.where(valid, base, 0.0), valid=valid, name="m")
        cfg = HyperplaneConfig(
            k=int(rng.choice([64, 128, 256])), seed=int(rng.integers(1 << 20))
        )
        ways = int(rng.integers(2, 9))
        cuts = sorted(rng.choice(np.arange(1, n), size=ways - 1, replace=False))
        bounds = [0, *map(int, cuts), n]
        parts = [
            build_hyperplane(col, cfg, rows=(lo, hi))
            for lo, hi in zip(bounds, bounds[1:])
        ]
        merged = parts[0]
        for part in parts[1:]:
            merged = merge_hyperplane(merged, part)
        single = finalize(build_hyperplane(col, cfg))
        assert np.array_equal(single.words, finalize(merged).words), "sign bits differ"

        whole = MomentSummary.from_values(base[valid])
        pieces = MomentSummary()
        for lo, hi in zip(bounds, bounds[1:]):
            chunk = base[lo:hi][valid[lo:hi]]
            pieces = pieces.merge(MomentSummary.from_values(chunk))
        assert pieces.count == whole.count
        for field in ("sum1", "sum2", "sum3", "sum4", "minimum", "maximum"):
            assert close(getattr(pieces, field), getattr(whole, field)), field
        checked += 1
    report("merge equivalence", checked == 50, f"{checked} datasets, 2-8 way splits")


def _oracle_unary(kind: str, x: np.ndarray) -> float:
    mu = x.mean()
    m2 = float(((x - mu) ** 2).mean())
    if kind == "variance":
        return m2
    if kind == "skewness":
        return float(((x - mu) ** 3).mean()) / m2**1.5
    if kind == "kurtosis":
        return float(((x - mu) ** 4).mean()) / (m2 * m2)
    z = np.abs(x - mu) / math.sqrt(m2)
    flagged = z[z > 3.0]
    return float(flagged.mean()) if flagged.size else 0.0


def test_metric_oracles():
    from scipy import stats

    rng = np.random.default_rng(77)
    kinds = ["variance", "skewness", "kurtosis", "outlier", "relfreq", "pearson", "spearman"]
    passed = 0
    for case in range(100):
        kind = kinds[case % len(kinds)]
        n = int(rng.integers(10, 1001))
        if kind == "relfreq":
            tokens = [f"t{v}" for v in rng.integers(0, int(rng.integers(2, 30)), size=n)]
            col = cat_col(tokens)
            exact = sum(c for _, c in Counter(tokens).most_common(3)) / n
            got = metrics.rel_freq_topk(col)
            assert got.defined and close(got.value, exact), f"case {case}"
        elif kind in ("pearson", "spearman"):
            x = rng.normal(size=n)
            y = 0.6 * x + 0.8 * rng.normal(size=n)
            cx, cy = num_col(x, name="x"), num_col(y, name="y")
            if kind == "pearson":
                expected = float(np.corrcoef(x, y)[0, 1])
                got = metrics.pearson(cx, cy)
            else:
                expected = float(stats.spearmanr(x, y).statistic)
                got = metrics.spearman(cx, cy)
            assert got.defined and close(got.value, expected), f"case {case}"
        else:
            x = rng.normal(loc=rng.normal() * 5, scale=0.5 + rng.random() * 4, size=n)
            if kind == "outlier":
                x[: max(1, n // 50)] += 40.0  # guarantee flagged points exist
            col = num_col(x)
            summary = MomentSummary.from_values(x)
            expected = _oracle_unary(kind, x)
            if kind == "outlier":
                mv = metrics.outlier_score(col)
            else:
                evaluator = {
                    "variance": metrics.variance,
                    "skewness": metrics.skewness,
                    "kurtosis": metrics.kurtosis,
                }[kind]
                mv = evaluator(summary)
            assert mv.defined and close(mv.value, expected, rel=1e-9), f"case {case}"
        passed += 1
    report("metric oracle suite", passed == 100, f"{passed} cases within 1e-9 relative")


def _random_dataset(rng, tag: str) -> Dataset:
    n = int(rng.integers(30, 1001))
    d = int(rng.integers(2, 9))
    cols = []
    prev = None
    for j in range(d):
        if rng.random() < 0.72:
            x = rng.normal(size=n)
            if prev is not None and rng.random() < 0.4:
                x = 0.8 * prev + 0.6 * x
            if rng.random() < 0.25:
                x = np.round(x * 3.0)
            prev = x
            valid = rng.random(n) >= 0.05
            cols.append(num_col(np.where(valid, x, 0.0), valid=valid, name=f"n{j}"))
        else:
            arity = int(rng.integers(2, 10))
            tokens = [
                f"v{v}" if keep else None
                for v, keep in zip(rng.integers(0, arity, size=n), rng.random(n) >= 0.05)
            ]
            cols.append(cat_col(tokens, name=f"c{j}"))
    return Dataset(name=tag, columns=tuple(cols), n_rows=n)


def _brute_rank(engine, class_id, fixed=(), metric_range=None, limit=10, order=None):
    spec = resolve_class(class_id)
    ds = engine.dataset
    names = [c.name for c in ds.columns if c.kind == spec.column_kinds[0]]
    tuples = (
        [(x,) for x in names]
        if spec.arity == 1
        else list(itertools.combinations(names, 2))
    )
    rows = []
    for t in tuples:
        if not set(fixed) <= set(t):
            continue
        mv = engine.metric_value(spec, t, use_sketch=False)
        if not mv.defined:
            continue
        value = abs(mv.value) if spec.rank_by_magnitude else mv.value
        if metric_range is not None and not metric_range[0] <= value <= metric_range[1]:
            continue
        rows.append((t, value))
    descending = (order or spec.sort_order) == DESCENDING
    rows.sort(key=lambda r: (-r[1] if descending else r[1], tuple(sorted(r[0]))))
    return rows[:limit]


def test_ranking_equivalence():
    rng = np.random.default_rng(2026)
    class_ids = list(CLASS_SPECS)
    agreed = 0
    for t in range(100):
        ds = _random_dataset(rng, f"rank{t}")
        engine = Engine(ds, seed=0)
        class_id = class_ids[t % len(class_ids)]
        spec = CLASS_SPECS[class_id]
        eligible = [c.name for c in ds.columns if c.kind == spec.column_kinds[0]]
        if len(eligible) < spec.arity:
            agreed += 1  # nothing to rank either way
            continue
        fixed = (eligible[int(rng.integers(len(eligible)))],) if rng.random() < 0.33 else ()
        metric_range = None
        if rng.random() < 0.33:
            lo = float(rng.uniform(0, 1.2))
            metric_range = (lo, lo + float(rng.uniform(0.2, 3.0)))
        order = "Ascending" if rng.random() < 0.2 else None
        limit = int(rng.integers(1, 12))
        got = rank_insights(
            engine,
            InsightQuery(
                class_id=class_id,
                fixed=fixed,
                metric_range=metric_range,
                limit=limit,
                mode="exact",
                order=order,
            ),
        )
        want = _brute_rank(
            engine, class_id, fixed=fixed, metric_range=metric_range,
            limit=limit, order=order,
        )
        assert [(d.attributes, d.value) for d in got] == want, f"dataset {t} {class_id}"
        agreed += 1
    report("ranking equivalence", agreed == 100, f"{agreed} datasets, all variants agree")


def test_sketch_recall(planted, sweep):
    ds, cols, _ = planted
    names = [c.name for c in cols]
    _, top10 = sweep
    exact = {}
    for i, j in itertools.combinations(range(len(cols)), 2):
        exact[(i, j)] = abs(metrics.pearson(cols[i], cols[j]).value)
    truth = sorted(
        exact,
        key=lambda ij: (-exact[ij], tuple(sorted((names[ij[0]], names[ij[1]])))),
    )
    truth_set = {frozenset(ij) for ij in truth[:10]}
    recalls = [len(s & truth_set) / 10.0 for s in top10[:ACCURACY_SEEDS]]
    mean_recall = sum(recalls) / len(recalls)
    report(
        "sketch-mode recall",
        mean_recall >= 0.8,
        f"mean top-10 recall {mean_recall:.3f} over {len(recalls)} seeds",
    )


def test_space_saving_bound():
    n, m = 100_000, 64
    rng = np.random.default_rng(8)
    draws = rng.zipf(1.1, size=n)
    tokens = [f"v{z}" for z in draws]
    col = cat_col(tokens, name="zipf")
    sketch = build_frequent_items(col, capacity=m)
    exact_counts = Counter(tokens)
    bound = n / m
    worst = 0.0
    for entry in sketch.entries():
        err = abs(entry.count - exact_counts[entry.item])
        worst = max(worst, err)
        assert err <= bound, f"{entry.item}: error {err} > {bound}"
    exact_share = sum(c for _, c in exact_counts.most_common(3)) / n
    est_share = estimated_rel_freq(sketch, 3)
    gap = abs(est_share - exact_share)
    report(
        "space-saving bound",
        worst <= bound and gap <= 3 / m,
        f"worst count error {worst:.0f} <= {bound:.0f}, share gap {gap:.4f} <= {3 / m:.4f}",
    )


def test_session_round_trip():
    rng = np.random.default_rng(55)
    ok = 0
    for t in range(50):
        ds = _random_dataset(rng, f"sess{t}")
        engine = Engine(ds, seed=0)
        state = sessions.new_state(engine)
        if rng.random() < 0.5:
            cid = list(CLASS_SPECS)[int(rng.integers(len(CLASS_SPECS)))]
            constraint = InsightQuery(
                class_id=cid, limit=int(rng.integers(1, 6)), mode="exact"
            )
            state = sessions.set_constraint(engine, state, constraint)
        candidates = [d for _, ranked in state.recommendations for d in ranked]
        rng.shuffle(candidates)
        for d in candidates[: int(rng.integers(0, 3))]:
            state = sessions.focus(engine, state, d)
        document = sessions.save_state(state)
        assert sessions.load_state(document, engine) == state, f"state {t} drifted"
        ok += 1

    other = Engine(_random_dataset(np.random.default_rng(56), "other"), seed=0)
    base = Engine(_random_dataset(np.random.default_rng(57), "base"), seed=0)
    assert fingerprint(other.dataset) != fingerprint(base.dataset)
    document = sessions.save_state(sessions.new_state(base))
    with pytest.raises(FingerprintMismatch):
        sessions.load_state(document, other)
    report("session round-trip", ok == 50, f"{ok} randomized states, mismatch rejected")


def test_determinism(tmp_path):
    runner = CliRunner()
    csv = tmp_path / "input.csv"
    args = [
        "synth", "--rows", "2000", "--cols", "10", "--seed", "13", "--out", str(csv),
        "--plant", "rho:0.7:a,b", "--plant", "hh:0.4:h",
    ]
    assert runner.invoke(main, args).exit_code == 0

    outputs = []
    for run in ("first", "second"):
        root = tmp_path / run
        root.mkdir()
        store = root / "store"
        assert runner.invoke(main, ["ingest", str(csv), "--out", str(store)]).exit_code == 0
        assert (
            runner.invoke(main, ["sketch", str(store), "--k", "128", "--seed", "3"]).exit_code
            == 0
        )
        blob = b""
        for query_args, name in [
            (["query", str(store), "--class", "linear", "--mode", "sketch", "--top", "10"], "q1"),
            (["query", str(store), "--class", "frequencies", "--mode", "exact"], "q2"),
            (["overview", str(store), "--class", "linear", "--mode", "sketch"], "q3"),
        ]:
            out = root / f"{name}.jsonl"
            res = runner.invoke(main, [*query_args, "--json", str(out)])
            assert res.exit_code == 0, res.output
            blob += out.read_bytes()
        outputs.append(blob)
    report(
        "determinism",
        outputs[0] == outputs[1] and len(outputs[0]) > 0,
        f"{len(outputs[0])} machine-readable bytes identical across runs",
    )
