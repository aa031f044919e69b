"""Offline oracle: tabulate (gamma, alpha, psi) for nontrivial zeta zeros with Arb.

alpha = 1/|rho zeta'(rho)|, psi = arg(rho zeta'(rho)). Output is the line-based
decimal format read by ``mertens_enum.zeros.parse_zero_file``. Progress is
appended chunk by chunk so an interrupted run can be resumed.

    python tools/make_zero_table.py --height 74000 --digits 70 --out data/zeros_74000.txt
"""
import argparse
import os
import sys
import time

from flint import acb, acb_series, arb, ctx


def fmt(x: arb, digits: int) -> str:
    s = x.mid().str(digits, radius=False)
    return s.replace("e", "E") if "e" in s else s


def count_lines(path):
    n, last = 0, None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            n += 1
            last = line
    return n, (float(last.split()[0]) if last else 0.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--height", type=float, required=True)
    ap.add_argument("--digits", type=int, default=70)
    ap.add_argument("--chunk", type=int, default=100)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    ctx.dps = args.digits + 25
    if os.path.exists(args.out):
        done, top = count_lines(args.out)
    else:
        with open(args.out, "w") as fh:
            fh.write(f"# generator: python-flint {__import__('flint').__version__} "
                     f"(Arb acb_dirichlet_zeta_zeros + zeta jet)\n")
            fh.write(f"# precision_digits: {args.digits}\n")
            fh.write(f"# height_range: 0 < gamma < {args.height:g}\n")
            fh.write("# columns: gamma alpha psi  (alpha = 1/|rho zeta'(rho)|, psi = arg(rho zeta'(rho)))\n")
        done, top = 0, 0.0

    tol = arb(10) ** (-args.digits)
    t0 = time.time()
    while top < args.height:
        zs = acb.zeta_zeros(done + 1, args.chunk)
        lines = []
        for rho in zs:
            g = rho.imag
            if g.mid() >= args.height:
                top = args.height
                break
            d = acb_series([rho, 1], prec=2).zeta().coeffs()[1]
            w = rho * d
            alpha = 1 / abs(w)
            psi = w.arg()
            for v in (g, alpha, psi):
                if not v.rad() < tol * abs(v.mid()):
                    sys.exit(f"insufficient working precision at zero {done + len(lines) + 1}")
            lines.append(f"{fmt(g, args.digits)} {fmt(alpha, args.digits)} {fmt(psi, args.digits)}\n")
            top = float(g.mid())
        with open(args.out, "a") as fh:
            fh.writelines(lines)
        done += len(lines)
        print(f"{done} zeros, height {top:.1f}, {time.time() - t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
