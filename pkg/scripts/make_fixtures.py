"""Regenerate the regression fixtures stored under tests/fixtures/."""
from pathlib import Path

from bochner import io
from bochner.acceptance import splitting_run
from bochner.bundle import trivial_connection
from bochner.lattice import build_torus
from bochner.perturbation import nontriviality_probe
from bochner.spectral import assemble_laplacian, cluster, eigensolve

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    _, report, _ = splitting_run(seed=1)
    io.atomic_write(OUT / "split_torus12_rank3.json", io.dumps17({
        "status": report.status.value,
        "iterations": len(report.iterations),
        "min_gap": report.min_gap,
        "leading_eigenvalues": report.leading_eigenvalues,
    }))
    base = build_torus(8, 8, 6.283185307179586, 6.283185307179586)
    conn = trivial_connection(base, 3)
    cl = next(c for c in cluster(eigensolve(assemble_laplacian(base, conn)))
              if c.mean_eigenvalue > 1e-8)
    probe = nontriviality_probe(cl, base, conn, trials=20, seed=1)
    io.atomic_write(OUT / "probe_torus8_rank3.json", io.dumps17({
        "cluster_start": cl.start, "multiplicity": cl.multiplicity,
        "trial": probe.trial, "spread": probe.spread, "slopes": probe.first_order.slopes,
    }))
    print(f"wrote fixtures to {OUT}")


if __name__ == "__main__":
    main()
