"""Smoke test for the nqac Python extension.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/py/Cargo.toml`.
"""

import math

import nqac


def main():
    p = nqac.IsingProblem([0.5, -0.2, 0.1], [(0, 1, -1.0), (1, 2, 0.3)])
    assert p.n_vars == 3
    assert math.isclose(p.energy([1, 1, 1]), 0.5 - 0.2 + 0.1 - 1.0 + 0.3)

    probs = nqac.gibbs_probabilities(p, 1.0)
    assert len(probs) == 8 and math.isclose(sum(probs), 1.0)

    code = nqac.nest(p, 2, 1.0)
    assert code.n_vars == 6
    assert nqac.replica_count(3, 16) == 8

    assert abs(nqac.ideal_bas_ll(4) + 3.38) < 0.005
    data = nqac.generate_bas(3, 40, seed=1)
    assert len(data) == 40 and all(len(x) == 9 for x in data)

    counts = nqac.sample(p, "sqa", beta=1.0, sweeps=200, n_reads=2000, seed=3, s_hold=1.0, n_slices=1)
    assert sum(counts.values()) == 2000
    reads = [list(s) for s, c in counts.items() for _ in range(c)]
    fit = nqac.estimate_beta_eff(p, reads)
    assert 0.7 < fit["beta_eff"] < 1.4, fit

    cfg = 'epochs = 2\nbatch_size = 20\nsamples_per_update = 500\nsampler = { kind = "exact", beta = 1.0 }\n'
    model, trace = nqac.train(cfg, data)
    assert model.n_vars == 9 and len(trace) == 4
    assert trace[-1]["exact_ll"] is not None

    print("smoke test passed:", p, "final exact_ll", round(trace[-1]["exact_ll"], 3))


if __name__ == "__main__":
    main()
