"""Smoke test for the Python bindings.

Build first with `maturin develop --release` in crates/py (inside a
virtualenv), then run `python python/smoke_test.py` from the repository root.
"""

import itertools
import json
import tempfile

import vsn_coverage as vc


def utility_from_parts(game, profile, i):
    # u_i = sum over seen cells of W_q / n_q, minus the control cost
    w = game.weights()
    seen = [set(game.footprint(*a)) for a in profile]
    share = sum(w[q] / sum(q in s for s in seen) for q in seen[i])
    return share - game.cost(profile[i][2])


def main():
    cfg = vc.Config.benchmark()
    game = cfg.game()
    assert game.n_agents == 2 and game.n_controls == 2
    cells = game.cells()
    actions = [(x, y, c) for (x, y) in cells for c in range(game.n_controls)]
    profiles = [list(p) for p in itertools.product(actions, repeat=game.n_agents)]
    assert len(profiles) == 1024

    worst = 0.0
    for p in profiles[::7]:
        for i in range(game.n_agents):
            worst = max(worst, abs(game.utility(p, i) - utility_from_parts(game, p, i)))
            for a in game.feasible_actions(*p[i][:2]):
                q = list(p)
                q[i] = a
                du = game.utility(q, i) - game.utility(p, i)
                dphi = game.potential(q) - game.potential(p)
                worst = max(worst, abs(du - dphi))
        assert abs(game.global_objective(p) - sum(game.utilities(p))) < 1e-9
    assert worst < 1e-9, worst

    rep = vc.verify(cfg)
    assert rep["pass"] and rep["profiles"] == 1024
    assert not vc.verify(cfg, negative_control=True)["pass"]

    orc = vc.oracle(cfg)
    assert len(orc["nash"]) == 22 and len(orc["optima"]) == 2
    assert abs(orc["m_star_exact"] - game.m_star()) < 1e-12
    assert game.m_star() <= game.m_star(exact=False)

    small = cfg.with_overrides(seed=3, replications=2, horizon=400, traces=True)
    traj = vc.simulate(small)
    assert len(traj["steps"]) == 400 and traj["seed"] == 3
    with tempfile.TemporaryDirectory() as out:
        summary = vc.run_experiment(small, out)
        assert summary["seeds"] == [3, 4]
        with open(f"{out}/summary.json") as f:
            assert json.load(f)["horizon"] == 400
        assert vc.recheck(out)["matches"]

    try:
        cfg.with_overrides(horizon=0)
    except vc.ValidationError as e:
        assert "horizon" in str(e)
    else:
        raise AssertionError("horizon 0 accepted")

    text = json.loads(cfg.to_json())
    text["caps"] = {"oracle": 10}
    try:
        vc.oracle(vc.Config.from_json(json.dumps(text)))
    except vc.CapacityError:
        pass
    else:
        raise AssertionError("oracle cap ignored")

    print(f"smoke test passed (max identity error {worst:.1e})")


if __name__ == "__main__":
    main()
