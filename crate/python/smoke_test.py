"""Smoke test for the efpl_py bindings: one quick pass over every entry
point. Run after installing the package (see build_native.sh)."""

import efpl_py

STRUCTURE = """\
universe a b c
fun c0/0 -> a
fun f/1: a -> b, b -> c, c -> c
rel Edge/2 negatable: (a,b) (b,c)
"""

VOCAB = """\
fun c0/0
fun f/1
rel Edge/2 negatable
"""


def main() -> None:
    s = efpl_py.Structure(STRUCTURE)
    assert s.universe() == ["a", "b", "c"]

    assert s.check("exists x. Edge(c0(), x)")
    assert not s.check("Edge(x, c0())", bind={"x": "a"})

    tc = "let T(x, y) <- (Edge(x, y) | exists z. (T(x, z) & T(z, y))) then T(a0, b0)"
    assert s.check(tc, bind={"a0": "a", "b0": "c"})

    closure_stage, deltas = s.stages(
        "T(x, y) <- (Edge(x, y) | exists z. (T(x, z) & T(z, y)))"
    )
    assert closure_stage == 2
    assert ("T", ["a", "b"]) in deltas[0]
    assert ("T", ["a", "c"]) in deltas[1]

    assert efpl_py.prenex("(exists x. Edge(x, x) & exists y. Edge(y, y))").startswith(
        "exists"
    )

    sat = efpl_py.gen_sat(VOCAB)
    assert sat.splitlines()[0].startswith("N(z) <-")
    meta_vocab = efpl_py.gen_vocab(VOCAB)
    assert "fun modify/3" in meta_vocab

    report = s.meta_check("exists x. Edge(c0(), x)")
    assert report.native and report.sat and report.agreement
    assert report.depth > 0 and report.closure_stage > 0

    identity = {e: e for e in s.universe()}
    assert s.hom_check(s, identity) == []
    collapsing = {"a": "a", "b": "a", "c": "a"}
    assert s.hom_check(s, collapsing) != []

    print("efpl_py smoke test: PASS")


if __name__ == "__main__":
    main()
