"""Smoke test for the pyuepsim extension.

Build first:  cargo build --release -p uepsim-py
Then run:     python3 python/smoke_test.py
(or `maturin develop -m crates/py/Cargo.toml` and import normally).
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import pyuepsim

        return pyuepsim
    except ImportError:
        pass
    lib = ROOT / "target" / "release" / "libpyuepsim.so"
    if not lib.exists():
        sys.exit(f"{lib} missing; run `cargo build --release -p uepsim-py`")
    loader = importlib.machinery.ExtensionFileLoader("pyuepsim", str(lib))
    spec = importlib.util.spec_from_loader("pyuepsim", loader)
    mod = importlib.util.module_from_spec(spec)
    loader.exec_module(mod)
    return mod


CONFIG = {
    "mode": "ber",
    "seed": 4,
    "code": {"n": 256, "rate": 0.65, "distribution": {"var": [[2, 0.5], [5, 0.5]], "perspective": "node"}},
    "scheme": "type_II",
    "flip": {"k": 3},
    "channel": {"kind": "pr"},
    "snr_db": [14.0],
    "budget": {"max_frames": 10},
}


def main():
    u = load()

    d = u.DegreeDistribution([(2, 0.5), (5, 0.5)], [(10, 0.9707), (11, 0.0293)])
    assert abs(d.to_edge().var[0][1] - 2 / 7) < 1e-12
    assert abs(d.design_rate() - (1 - 3.5 / 10.0293)) < 1e-9

    code = u.Code(u.DegreeDistribution([(2, 0.5), (5, 0.5)]), 256, rate=0.65, seed=1)
    msg = [i % 2 for i in range(code.k)]
    v = code.encode(msg)
    assert code.is_codeword(v) and list(code.extract_message(v)) == msg
    hard, app, ok = code.decode([4.0 - 8.0 * b for b in v], 10)
    assert ok and hard == v

    flipped, pos = u.quaternary_flip([0] * 10, 3, 2)
    assert list(flipped) == [0, 0, 0, 2, 0, 0, 0, 2, 0, 0] and pos == [3, 7]
    assert u.verify_rll(flipped, 3) and not u.verify_rll([0] * 10, 3)
    assert abs(u.stationary_flip_rate(1, 0.25) - 0.05) < 1e-12

    assert u.aewe("gray")[0b10] == [(0.8, 0.5), (7.2, 0.5)]
    x = list(range(16))
    assert list(u.deinterleave("type_II", u.interleave("type_II", x))) == x

    link = u.Link.from_config(json.dumps(CONFIG))
    a = link.ber_point(14.0, 6, seed=9)
    b = link.ber_point(14.0, 6, seed=9)
    assert a == b and a["frames"] == 6 and len(a["ber_per_outer"]) == 5

    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "cfg.json"
        cfg.write_text(json.dumps(CONFIG))
        out = u.run_experiment(str(cfg), tmp)
        lines = pathlib.Path(out).read_text().splitlines()
        assert lines[1].startswith("config_hash,seed,git_describe,snr_db")
        try:
            u.run_experiment(str(cfg.with_name("missing.json")), tmp)
        except ValueError:
            pass
        else:
            raise AssertionError("missing config accepted")

    pe, converged = u.density_evolution(json.dumps(CONFIG), d, 18.0, trials=1000, u_max=3)
    assert len(pe) >= 2 and pe[-1] <= pe[0] and not converged

    print("pyuepsim smoke test OK", u.GIT_DESCRIBE)


if __name__ == "__main__":
    main()
