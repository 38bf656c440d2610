import json
from fractions import Fraction as F

import pytest

from pbpc.cli import main
from pbpc.equilibrium import bounds_summary
from pbpc.errors import InvalidInputError, ValidationError
from pbpc.instances import (
    BUILTINS,
    FIGURES,
    gen_bestpc_family,
    gen_builtin,
    gen_vcg_family,
    parse_generator,
)
from pbpc.io import (
    instance_digest,
    instance_from_dict,
    load_instance,
    load_profile,
    save_instance,
)
from pbpc.market import MarketInstance, validate_instance
from pbpc.mechanisms import run_mechanism

EXAMPLE1 = {
    "name": "example1",
    "max_bid": 3,
    "producers": [
        {"supply": [1, 3], "cost": 0},
        {"supply": [1, 2], "cost": 1},
        {"supply": [1, 4], "cost": 2},
        {"supply": [2, 3], "cost": 3},
    ],
}


def test_load_example_file(tmp_path):
    path = tmp_path / "ex.json"
    path.write_text(json.dumps(EXAMPLE1))
    inst = load_instance(path)
    assert inst == gen_builtin("example1")


def test_short_supply_reports_all_problems():
    bad = {"max_bid": 3, "producers": [{"supply": [1, 3], "cost": 0}, {"supply": 0.2, "cost": 7}]}
    with pytest.raises(ValidationError) as err:
        instance_from_dict(bad)
    assert len(err.value.problems) >= 2


@pytest.mark.parametrize(
    "data",
    [
        [],
        {"producers": []},
        {"max_bid": 3, "producers": [{"supply": "x", "cost": 0}]},
        {"max_bid": 3, "producers": [{"supply": 1, "cost": 1.5}]},
        {"max_bid": 3, "producers": [{"supply": 1}]},
    ],
)
def test_malformed_input(data):
    with pytest.raises(InvalidInputError):
        instance_from_dict(data)


def test_decimal_supply_is_exact():
    inst = instance_from_dict({"max_bid": 2, "producers": [[3, 10, 0], {"supply": 0.7, "cost": 1}]})
    assert inst.supplies == (F(3, 10), F(7, 10))


def test_round_trip_and_digest(tmp_path):
    for name in BUILTINS:
        inst = gen_builtin(name)
        path = save_instance(inst, tmp_path / f"{name}.json")
        again = load_instance(path)
        assert again == inst
        assert instance_digest(again) == instance_digest(inst)
    a = gen_builtin("sec31")
    renamed = MarketInstance("other", a.max_bid, a.producers)
    assert instance_digest(renamed) == instance_digest(a)
    bumped = MarketInstance(a.name, a.max_bid + 1, a.producers)
    assert instance_digest(bumped) != instance_digest(a)


def test_no_temp_files_left(tmp_path):
    save_instance(gen_builtin("fig3"), tmp_path / "x.json")
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


def test_builtins_valid():
    for name in BUILTINS:
        assert validate_instance(gen_builtin(name)).ok, name
    assert set(FIGURES) <= set(BUILTINS)


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_vcg_family_shape(k):
    inst = gen_vcg_family(k, 3)
    assert inst.n == 2 * k - 1 and inst.max_bid == 3 * k - 2
    assert inst.total_supply == 1 + F(1, k) - F(1, k * k)
    assert validate_instance(inst).ok


def test_vcg_family_k2():
    inst = gen_vcg_family(2, 3)
    assert inst.supplies == (F(1, 2), F(1, 2), F(1, 4))
    assert inst.costs == (0, 0, 3)


def test_vcg_family_k3():
    inst = gen_vcg_family(3, 4)
    assert inst.supplies == (F(1, 3), F(1, 3), F(1, 3), F(1, 6), F(1, 18))
    assert inst.costs == (0, 0, 0, 4, 6)
    assert inst.max_bid == 10


def test_bestpc_family():
    inst = gen_bestpc_family(10)
    assert inst.supplies == (F(1, 2), F(3, 4), F(1, 4))
    assert inst.costs == (0, 0, 10) and inst.max_bid == 30
    assert run_mechanism("pc", inst, [10, 0, 10]).unit_price <= 10


def test_generator_errors():
    for spec in ("vcg:1,3", "vcg:3,2", "bestpc:0", "nope", "vcg:a,b", "vcg:3"):
        with pytest.raises(InvalidInputError):
            parse_generator(spec)


def test_load_profile(tmp_path):
    pure = tmp_path / "p.json"
    pure.write_text("[1, 2]")
    assert load_profile(pure) == [1, 2]
    mixed = tmp_path / "m.json"
    mixed.write_text('[{"2": [1, 4], "3": 0.75}, {"0": 1}]')
    assert load_profile(mixed) == [{2: F(1, 4), 3: F(3, 4)}, {0: F(1)}]
    bad = tmp_path / "b.json"
    bad.write_text('[1, {"0": 1}]')
    with pytest.raises(InvalidInputError):
        load_profile(bad)


# -- CLI ---------------------------------------------------------------------


def test_cli_analyze_fig3(capsys):
    assert main(["analyze", "fig3"]) == 0
    out = capsys.readouterr().out
    assert "pc_pure_price   800" in out and "pc_floor        267" in out


def test_cli_analyze_json(tmp_path, capsys):
    target = tmp_path / "r.json"
    assert main(["analyze", "sec31", "--json", "--out", str(target)]) == 0
    data = json.loads(target.read_text())
    assert data["pc_pure_price"] == bounds_summary(gen_builtin("sec31")).pc_pure_price


def test_cli_enumerate_cor_pb(capsys):
    assert main(["enumerate", "--pure", "cor-pb", "--mech", "pb"]) == 0
    assert capsys.readouterr().out.startswith("0 pure equilibria of PB")


def test_cli_simulate_deterministic(tmp_path, capsys):
    argv = ["simulate", "sec31", "--mech", "pb", "--iters", "300", "--seed", "9"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a = (tmp_path / "a" / "sec31_pb_seed9.csv").read_bytes()
    b = (tmp_path / "b" / "sec31_pb_seed9.csv").read_bytes()
    assert a == b
    manifest = json.loads((tmp_path / "a" / "sec31_pb_seed9.manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["instance_digest"] == instance_digest(gen_builtin("sec31"))


def test_cli_gen_and_verify(tmp_path, capsys):
    inst_path = tmp_path / "bp.json"
    assert main(["gen", "bestpc:3", "--out", str(inst_path)]) == 0
    prof = tmp_path / "p.json"
    prof.write_text("[3, 0, 3]")
    assert main(["verify", str(inst_path), "--profile", str(prof), "--mech", "pc"]) == 0
    assert "PC on bestpc:3: equilibrium; epsilon = 0" in capsys.readouterr().out
    prof.write_text("[0, 0, 3]")
    assert main(["verify", str(inst_path), "--profile", str(prof), "--mech", "pc"]) == 0
    assert "not an equilibrium" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    assert main(["analyze", "no-such-thing"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"max_bid": 3, "producers": [{"supply": [1, 3], "cost": 0}]}))
    assert main(["analyze", str(bad)]) == 2
    assert main(["enumerate", "--pure", "fig3", "--mech", "pb", "--budget", "10"]) == 3


def test_cli_rolls_back_partial_output(tmp_path, capsys):
    out_dir = tmp_path / "fig"
    code = main(
        ["reproduce", "fig3", "--out", str(out_dir), "--iters", "2", "--feedback", "exact"]
    )
    assert code == 3
    assert not out_dir.exists() or not any(out_dir.iterdir())
