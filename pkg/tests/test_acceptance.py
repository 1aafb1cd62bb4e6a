"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed live) or
``python tests/test_acceptance.py``. Each test asserts the same condition it
prints, so a FAIL line is always a failing test.
"""

import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (  # noqa: E402
    as_float,
    chain_q_star,
    exhaustive_optimum,
    history_dp,
    relative_error,
    tabular_sarsa,
    window_mean_oracle,
)
from scipy import stats as sps  # noqa: E402

from stickybench.agents.brute import (  # noqa: E402
    ROOT_KEY,
    BruteAgent,
    EpisodeTranscript,
    HistoryTree,
    combine,
    observation_digest,
)
from stickybench.agents.dqn import (  # noqa: E402
    Batch,
    DQNMiniAgent,
    QNetwork,
    td_gradient,
    td_loss,
)
from stickybench.agents.sarsa import LinearLearner, SarsaLambdaAgent  # noqa: E402
from stickybench.cli import main  # noqa: E402
from stickybench.envs import GameSpec, Observation, make_env  # noqa: E402
from stickybench.envs.games import ChainWalk  # noqa: E402
from stickybench.protocol import TrialRecord, milestone_score, run_trial, summary_metrics  # noqa: E402
from stickybench.stats import welch_t_test  # noqa: E402
from stickybench.wrappers import FrameSkip, StickyActions, StickyConfig, wrap_sticky  # noqa: E402

RESULTS = {}


def report(n, ok, detail, capsys=None):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def play(env, actions):
    env.reset()
    out = []
    for a in actions:
        r = env.step(a)
        out.append((r.observation, r.reward, r.terminal, r.frames_consumed))
        if r.terminal:
            break
    return out


# ------------------------------------------------------------------------ 1

def test_criterion_01_sticky_statistics(capsys):
    t0 = time.perf_counter()
    env = StickyActions(make_env("chain_walk:1:1", max_episode_frames=10 ** 7), 0.25, 1, rng=0)
    env.reset()
    # intercepts are counted on frames where the intent differs from the previous action
    eligible = intercepted = 0
    for t in range(100_000):
        intent = 1 + t % 2
        prev = env.prev_executed
        r = env.step(intent)
        if intent != prev:
            eligible += 1
            intercepted += env.last_trace[0][1] != intent
        if r.terminal:
            env.reset()
    freq = intercepted / eligible

    env = wrap_sticky(make_env("chain_walk:1:1", max_episode_frames=10 ** 7),
                      StickyConfig(0.25, 1), rng=np.random.default_rng(1))
    env.reset()
    runs = []
    for _ in range(20_000):
        env.step(1)
        while env.last_trace[0][1] != 1:
            env.step(1)
        k = 0
        while True:
            env.step(0)
            if env.last_trace[0][1] == 0:
                break
            k += 1
        runs.append(k)
    mean_run = float(np.mean(runs))
    elapsed = time.perf_counter() - t0
    ok = abs(freq - 0.25) <= 0.01 and abs(mean_run - 1 / 3) <= 0.02 and elapsed < 2
    report(1, ok, f"intercept={freq:.4f} (0.25+-0.01) mean_run={mean_run:.4f} (0.333+-0.02) "
                  f"time={elapsed:.2f}s (<2s)", capsys)


# ------------------------------------------------------------------------ 2

def test_criterion_02_zero_stickiness_equals_frame_skip(capsys):
    t0 = time.perf_counter()
    sticky = wrap_sticky(make_env("chain_walk:1:1"), StickyConfig(0.0, 5), rng=np.random.default_rng(0))
    skip = FrameSkip(make_env("chain_walk:1:1"), 5)
    checked = mismatched = 0
    for length in range(0, 7):
        for seq in itertools.product(range(3), repeat=length):
            checked += 1
            mismatched += play(sticky, seq) != play(skip, seq)
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and elapsed < 10
    report(2, ok, f"{checked} sequences, {mismatched} mismatches, time={elapsed:.2f}s (<10s)", capsys)


# ------------------------------------------------------------------------ 3

def test_criterion_03_brute_matches_history_dp(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    env = make_env("chain_walk:1:1", max_episode_frames=8)
    compared = mismatches = 0
    for _ in range(1_000):
        tree = HistoryTree(3)
        episodes = []
        for _ in range(int(rng.integers(1, 6))):
            env.reset()
            steps, transcript, key = [], EpisodeTranscript(), ROOT_KEY
            for a in rng.integers(0, 3, size=8):
                r = env.step(int(a))
                obs = (r.observation.payload, r.observation.lives, r.reward, r.terminal)
                steps.append((int(a), obs, r.reward))
                d = observation_digest(r.observation, r.reward, r.terminal)
                key = combine(key, int(a), d)
                transcript.steps.append((int(a), d, r.reward))
                transcript.keys.append(key)
                if r.terminal:
                    transcript.terminal = True
                    break
            episodes.append((steps, True))
            tree.update(transcript)
            for h, qs in history_dp(episodes, 3).items():
                key = ROOT_KEY
                for a, (payload, lives, reward, terminal) in h:
                    key = combine(key, a, observation_digest(Observation(payload, lives), reward, terminal))
                compared += 1
                mismatches += tree.nodes[key].q != [as_float(v) for v in qs]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    report(3, ok, f"{compared} node comparisons over 1000 sets, {mismatches} mismatches, "
                  f"time={elapsed:.1f}s (<30s)", capsys)


# ------------------------------------------------------------------------ 4

def test_criterion_04_brute_optimal_when_deterministic(capsys):
    parts, ok = [], True
    for game in ("chain_walk:1:1", "cliff_corridor:1:1"):
        optimum = exhaustive_optimum(StickyActions(make_env(game), 0.0, 5))
        hits = 0
        for seed in range(20):
            env = StickyActions(make_env(game), 0.0, 5, rng=seed)
            agent = BruteAgent(random_state=seed).fit(env, 5_000)
            final = np.mean([e.score for e in agent.episodes_[-20:]])
            hits += final == optimum
        ok &= hits >= 19
        parts.append(f"{game}: {hits}/20 at optimum {optimum:g}")
    report(4, ok, "; ".join(parts) + " (need >=95%)", capsys)


# ------------------------------------------------------------------------ 5

def _final_mean(agent_cls, varsigma, seed, budget):
    env = StickyActions(make_env("cliff_corridor:1:1"), varsigma, 5, rng=1_000 + seed)
    agent = agent_cls(random_state=seed).fit(env, budget)
    return float(np.mean([e.score for e in agent.episodes_[-20:]]))


def test_criterion_05_brute_fragile_sarsa_robust(capsys):
    t0 = time.perf_counter()
    budget, seeds = 50_000, range(20)
    scores = {}
    for name, cls in (("brute", BruteAgent), ("sarsa", SarsaLambdaAgent)):
        for vs in (0.0, 0.25):
            scores[name, vs] = np.array([_final_mean(cls, vs, s, budget) for s in seeds])
    deg = {n: 1 - scores[n, 0.25].mean() / scores[n, 0.0].mean() for n in ("brute", "sarsa")}
    per_seed = {n: 1 - scores[n, 0.25] / scores[n, 0.0] for n in ("brute", "sarsa")}
    paired = float(np.mean(per_seed["brute"] > per_seed["sarsa"]))
    elapsed = time.perf_counter() - t0
    ok = deg["brute"] >= 0.5 and deg["sarsa"] <= 0.2 and paired >= 0.8 and elapsed < 300
    report(5, ok, f"brute {scores['brute', 0.0].mean():.2f}->{scores['brute', 0.25].mean():.2f} "
                  f"deg={deg['brute']:.3f} (>=0.5); sarsa {scores['sarsa', 0.0].mean():.2f}->"
                  f"{scores['sarsa', 0.25].mean():.2f} deg={deg['sarsa']:.3f} (<=0.2); "
                  f"paired={paired:.2f} (>=0.8); time={elapsed:.0f}s (<300s)", capsys)


# ------------------------------------------------------------------------ 6

def test_criterion_06_sarsa_correctness(capsys):
    env = ChainWalk(GameSpec("chain_walk"), length=3)
    agent = SarsaLambdaAgent(alpha=0.1, lambda_=0.0, random_state=0).fit(env, 60_000)
    vi_err = float(np.max(np.abs(agent.coef_.reshape(3, 3)[:2] - chain_q_star(3, 0.99)[:2])))

    L = LinearLearner(6, gamma=0.99, lam=0.9, trace_threshold=0.0)
    for i in range(3):
        L.update((i,), 0.0, (i + 1,), False)
    decay = 0.99 * 0.9
    traces_ok = L.trace == {0: (1.0 * decay) * decay, 1: decay, 2: 1.0}

    exact = 0
    runs = [(g, s) for g in ("chain_walk:1:1", "cliff_corridor:1:1", "key_door:1:2") for s in range(3)]
    for game, seed in runs:
        a = SarsaLambdaAgent(lambda_=0.0, random_state=seed).fit(
            StickyActions(make_env(game), 0.25, 5, rng=seed), 4_000)
        env_b = StickyActions(make_env(game), 0.25, 5, rng=seed)
        q, scores = tabular_sarsa(env_b, env_b.observation_high, env_b.action_count, 4_000,
                                  alpha=0.5, gamma=0.99, epsilon=0.01, seed=seed)
        exact += np.array_equal(a.coef_.reshape(q.shape), q) and [e.score for e in a.episodes_] == scores
    ok = vi_err < 1e-2 and traces_ok and exact == len(runs)
    report(6, ok, f"VI max error={vi_err:.4f} (<1e-2); trace constants exact={traces_ok}; "
                  f"bit-exact runs {exact}/{len(runs)}", capsys)


# ------------------------------------------------------------------------ 7

def test_criterion_07_dqn_gradients_targets_rewards(capsys):
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        n_in, n_act, n_hid = (int(v) for v in rng.integers([1, 2, 2], [6, 6, 12]))
        online = QNetwork(n_in, n_act, n_hid, rng=rng.integers(2 ** 32))
        target = QNetwork(n_in, n_act, n_hid, rng=rng.integers(2 ** 32))
        size = int(rng.integers(1, 33))
        batch = Batch(rng.normal(size=(size, n_in)), rng.integers(n_act, size=size),
                      rng.choice([-1.0, 0.0, 1.0], size=size), rng.normal(size=(size, n_in)),
                      rng.random(size) < 0.3)
        gamma = float(rng.uniform())
        analytic = np.concatenate([g.ravel() for g in td_gradient(online, target, batch, gamma)])
        theta = online.flat()
        numeric = np.empty_like(theta)
        for i in range(theta.size):
            bumped = theta.copy()
            bumped[i] += 1e-6
            online.set_flat(bumped)
            up = td_loss(online, target, batch, gamma)
            bumped[i] -= 2e-6
            online.set_flat(bumped)
            numeric[i] = (up - td_loss(online, target, batch, gamma)) / 2e-6
        online.set_flat(theta)
        mask = np.maximum(np.abs(analytic), np.abs(numeric)) > 1e-7
        if mask.any():
            worst = max(worst, relative_error(analytic[mask], numeric[mask]))

    import stickybench.agents.dqn as dqn

    seen = []
    real_update = dqn.dqn_update

    def spy(online, target, batch, alpha, gamma, optimizer=None):
        seen.append((agent.n_syncs_, target.flat().copy()))
        return real_update(online, target, batch, alpha, gamma, optimizer)

    dqn.dqn_update = spy
    try:
        env = StickyActions(make_env("key_door:1:2"), 0.25, 1, rng=0)
        agent = DQNMiniAgent(warmup=100, target_sync=200, random_state=0)
        agent.fit(env, 8_000)
    finally:
        dqn.dqn_update = real_update
    epochs = {}
    for epoch, flat in seen:
        epochs.setdefault(epoch, []).append(flat)
    constant = all(all(np.array_equal(f, fl[0]) for f in fl) for fl in epochs.values())
    rewards = agent.replay_.rewards[:len(agent.replay_)]
    clipped = set(np.unique(rewards).tolist()) <= {-1.0, 0.0, 1.0}
    raw_max = max(e.score for e in agent.episodes_)
    ok = worst < 1e-4 and constant and len(epochs) > 5 and clipped
    report(7, ok, f"max relative gradient error={worst:.2e} (<1e-4); target constant across "
                  f"{len(epochs)} sync epochs={constant}; replayed rewards "
                  f"{sorted(set(np.unique(rewards).tolist()))} (raw episode max {raw_max:g})", capsys)


# ------------------------------------------------------------------------ 8

def test_criterion_08_welch_matches_reference(capsys):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        na, nb = rng.integers(2, 40, size=2)
        a = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), na)
        b = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), nb)
        ours = welch_t_test(a, b)
        ref = sps.ttest_ind(a, b, equal_var=False)
        va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
        df = (va + vb) ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
        worst = max(worst, abs(ours.t - ref.statistic), abs(ours.df - df), abs(ours.p - ref.pvalue))
    same = welch_t_test([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    ok = worst <= 1e-6 and same.t == 0 and same.p == 1
    report(8, ok, f"max |diff| in t/df/p over 50 pairs={worst:.1e} (<=1e-6); "
                  f"identical samples t={same.t:g} p={same.p:g}", capsys)


# ------------------------------------------------------------------------ 9

def test_criterion_09_protocol_accounting(capsys):
    rng = np.random.default_rng(9)
    frames = rng.integers(1, 400, size=500)
    scores = rng.normal(size=500).round(3).tolist()
    rec = TrialRecord("a", "g", 0, 0)
    for s, f in zip(scores, frames):
        rec.append(s, int(f), int(f))
    cum = np.cumsum(frames)
    window_err = 0.0
    for m in rng.integers(1, cum[-1] + 1, size=300):
        for k in (1, 10, 100):
            window_err = max(window_err, abs(milestone_score(rec, int(m), k)
                                             - window_mean_oracle(scores, cum, int(m), k)))

    trial = run_trial({"type": "sarsa_lambda", "params": {}}, "cliff_corridor:1:1", 10_000,
                      [10_000], 5, [{"type": "sticky", "varsigma": 0.25, "frame_skip": 5}])
    running, sums_ok = 0, True
    for e in trial.episodes:
        running += e.frames
        sums_ok &= e.cum_frames == running

    skip = run_trial({"type": "sarsa_lambda", "params": {}}, "crossing:1:1", 5_000, [5_000], 0,
                     [{"type": "frame_skip", "k": 5}])
    five = all(e.frames == 5 * e.decisions for e in skip.episodes)
    ok = window_err < 1e-12 and sums_ok and five and trial.failure is None
    report(9, ok, f"windowing oracle max error={window_err:.1e}; frame sums match counters={sums_ok}; "
                  f"skip-5 frames == 5 x decisions={five}", capsys)


# ----------------------------------------------------------------------- 10

GRID = {
    "agents": [{"type": "brute"}, {"type": "sarsa_lambda"}, {"type": "dqn_mini"}],
    "games": ["chain_walk:1:1", "cliff_corridor:1:1", "crossing:1:1", "key_door:1:1"],
    "stochasticity": {"det": [{"type": "sticky", "varsigma": 0.0, "frame_skip": 5}],
                      "sticky": [{"type": "sticky", "varsigma": 0.25, "frame_skip": 5}]},
    "frame_budget": 50_000,
    "trials_per_cell": 5,
    "base_seed": 0,
}


def _artifacts(out):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(Path(out).rglob("*")) if p.is_file()}


def test_criterion_10_end_to_end_reproducibility(tmp_path, capsys):
    cfg_a = tmp_path / "grid.json"
    cfg_a.write_text(json.dumps(GRID))
    cfg_b = tmp_path / "grid_seed.json"
    cfg_b.write_text(json.dumps({**GRID, "base_seed": 1}))
    t0 = time.perf_counter()
    code_a = main(["run", str(cfg_a), "--out", str(tmp_path / "a"), "-q"])
    grid_time = time.perf_counter() - t0
    code_b = main(["run", str(cfg_a), "--out", str(tmp_path / "b"), "-q"])
    code_c = main(["run", str(cfg_b), "--out", str(tmp_path / "c"), "-q"])
    a, b, c = (_artifacts(tmp_path / d) for d in "abc")
    identical = a == b
    kinds = {f.rsplit(".", 1)[-1] for f in a}
    logs_changed = any(a[f] != c[f] for f in a if f.endswith(".jsonl"))
    schemas_same = set(a) == set(c) and all(
        a[f].splitlines()[0] == c[f].splitlines()[0] for f in a if f.endswith(".csv")) and all(
        list(json.loads(a[f].splitlines()[0])) == list(json.loads(c[f].splitlines()[0]))
        for f in a if f.endswith(".jsonl"))
    n_records = len([f for f in a if f.endswith(".jsonl")])
    ok = (code_a == code_b == code_c == 0 and identical and {"jsonl", "csv", "svg"} <= kinds
          and logs_changed and schemas_same and n_records == 120 and grid_time < 900)
    report(10, ok, f"{n_records} trials; rerun byte-identical={identical}; base_seed changes logs="
                   f"{logs_changed}, schemas kept={schemas_same}; grid time={grid_time:.0f}s (<900s)",
           capsys)


# ----------------------------------------------------------------------- 11

def test_criterion_11_metric_discrimination(capsys):
    scores = [0] * 200 + [100] * 100 + [0] * 700
    rec = TrialRecord("a", "g", 0, 0)
    for s in scores:
        rec.append(s, 50, 250)
    m = summary_metrics(rec, k=100)
    ok = (m["best_window"] >= 5 * m["auc"] and m["final_window"] < m["auc"] < m["best_window"])
    report(11, ok, f"best_window={m['best_window']:g} auc={m['auc']:g} "
                   f"final_window={m['final_window']:g} (best >> auc > final)", capsys)


if __name__ == "__main__":
    import tempfile

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d), None)
                else:
                    fn(None)
            except AssertionError:
                pass
    print("\n".join(RESULTS[n] for n in sorted(RESULTS)))
