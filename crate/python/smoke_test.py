"""Smoke test of the cva_py extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import math

import cva_py


def close(a, b, tol):
    return abs(a - b) <= tol * max(abs(b), 1e-300)


def main():
    cir = cva_py.Intensity.builtin("cir-2")
    assert cir.kind == "cir" and 0.0 < cir.survival(1.0) < 1.0
    vas = cva_py.Intensity.vasicek(0.09, 0.3, 0.4, 0.1)
    assert vas.survival(0.5) > vas.survival(1.0)

    corr = cva_py.Correlation(-0.3, 0.5, 0.2)
    assert close(corr.alpha ** 2 + corr.beta ** 2 + corr.nu ** 2, 1.0, 1e-12)
    assert corr.matrix()[0][1] == -0.3
    try:
        cva_py.Correlation(-0.3, 0.99, 0.5)
    except cva_py.InputError as e:
        print("rejected:", e)
    else:
        raise AssertionError("inadmissible correlation accepted")

    for name in ["sabr-fit", "heston-fit"]:
        model = cva_py.Model.builtin(name)
        market = model.market(0.5)
        g = cva_py.price(model, market)
        assert g["u"] > 0.0 and 0.0 < g["ux"]

        zero = cva_py.cva_first(model, cir, market, cva_py.Correlation(model.eta, 0.0))
        assert close(zero["total"], (1.0 - cir.survival(0.5)) * zero["price"], 1e-12)

        c = cva_py.Correlation(model.eta, 0.5)
        first = cva_py.cva_first(model, cir, market, c)
        second = cva_py.cva_second(model, cir, market, 0.5)
        mc = cva_py.cva_mc(model, cir, market, c, paths=20_000, steps=100, seed=1)
        assert first["total"] > zero["total"]
        assert mc["stderr"] > 0.0 and mc["cv_correlation"] > 0.5
        print(
            f"{name}: first {first['total']:.4e} second {second['total']:.4e} "
            f"mc {mc['mean']:.4e} +- {mc['stderr']:.1e}"
        )
        assert abs(first["total"] - mc["mean"]) < max(5 * mc["stderr"], 0.1 * mc["mean"])

    text = "\n".join([
        "model.kind = sabr",
        "intensity.kind = cir",
        "intensity.set = cir-1",
        "option.maturity = 0.5",
        "sweep.rho_grid = -0.5,0,0.5",
        "sweep.methods = first,second",
    ])
    csv = cva_py.run_config(text)
    lines = [l for l in csv.splitlines() if not l.startswith("#")]
    assert lines[0] == "rho,cva_mc,cva_mc_stderr,cv_corr,cva_first,cva_second"
    assert len(lines) == 4
    assert csv == cva_py.run_config(text)
    first_col = [float(l.split(",")[4]) for l in lines[1:]]
    assert first_col == sorted(first_col) and all(math.isfinite(v) for v in first_col)

    try:
        cva_py.run_config(text, [("model.kind", "heston"), ("option.maturity", "0.1"), ("quad.upper", "5")])
    except cva_py.NumericalError as e:
        print("numerical error:", e)
    else:
        raise AssertionError("truncation error not reported")

    try:
        cva_py.run_config(text + "\nmc.pathz = 3")
    except cva_py.InputError as e:
        print("config error:", e)
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
