"""SpMV versus matrix-free operator application across polynomial degrees.

Times the best run out of many repetitions for both variants, after a
correctness gate confirming identical products.  The assembled path also
pays an assembly phase, reported separately.
"""

from fracturekit import ScenarioConfig, benchmark_vmult

REPS = 50

print(f"best of {REPS} runs at level 5")
print("degree     dofs   spmv [ms]   mfmv [ms]   assemble [ms]   mfmv/spmv")
for degree in (1, 2, 3, 4):
    cfg = ScenarioConfig(scenario="tension", level=5, degree=degree, steps=1,
                         cache_tensors=False)
    recs = {r.kind: r for r in benchmark_vmult(cfg, reps=REPS)}
    spmv = recs["spmv"].best_time_s * 1e3
    mfmv = recs["mfmv"].best_time_s * 1e3
    asm = recs["assemble"].best_time_s * 1e3
    print(f"{degree:>6}  {recs['mfmv'].dofs:>7}   {spmv:>9.3f}   {mfmv:>9.3f}"
          f"   {asm:>13.1f}   {mfmv / spmv:>9.2f}")

print("\nratios below 1 mean the matrix-free product beats the sparse one")
print("even before counting the assembly time the sparse path must pay.")
