"""Smoke test for the efxpo extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, or
`cargo build -p efxpo-python --release && cp target/release/libefxpo.so python/efxpo.so`.
"""

import json
from fractions import Fraction

import efxpo


def main():
    intro = efxpo.Instance(2, 2, [(1, 10), (1, 9)])
    sol = efxpo.solve(intro, verify="full")
    assert sol.allocation == [(1, 1), (1, 1)], sol
    assert sol.efx and sol.proper_witness is not None
    assert intro.utility(0, (1, 1)) == "11" and intro.utility(1, (1, 1)) == "10"
    assert efxpo.pareto_dominator(intro, sol.allocation) is None
    assert not efxpo.is_efx(intro, [(2, 2), (0, 0)])

    again = efxpo.Instance.from_json(intro.to_json())
    assert again.agents == intro.agents

    mixed = efxpo.Instance(4, 5, [(Fraction(5, 2), 1), ("2/5", "1.2"), (3, 7)])
    sol = efxpo.solve(mixed, checks="full")
    assert efxpo.is_efx(mixed, sol.allocation)
    assert efxpo.proper_witness(mixed, sol.allocation) is not None
    assert json.loads(sol.to_json())["certificate"]["kind"] == sol.certificate

    report = json.loads(efxpo.validate_theorems(mixed))
    assert report["violations"] == [], report

    for bad in ([(0, 1)], [(1.5, 1)], []):
        try:
            efxpo.Instance(1, 1, bad)
        except (ValueError, TypeError):
            pass
        else:
            raise AssertionError(f"accepted {bad!r}")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
