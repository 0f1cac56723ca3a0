"""
Delay sweep: PID alone versus PID with the modified observer
============================================================

Run every preset at the four loop delays. PID alone starts oscillating and
then diverges as the delay grows; with the observer the tracking error stays
at its delay-free value.
"""

from pathlib import Path

from cdoblab import sim

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

for kind in ("single-lane", "double-lane", "avoidance"):
    base = sim.Scenario(path=kind)
    rows = sim.sweep(base, sim.PAPER_TAUS, ["pid", "pid-cdob-modified"])
    print(f"\n{kind}")
    print(sim.summary_text(rows), end="")
    (out / f"sweep_{kind}.csv").write_text(sim.summary_csv(rows))

    # ey traces for the largest delay, against the delay-free PID run
    ideal = sim.run_scenario(sim.Scenario(path=kind, controller="pid"))
    ideal.label = "pid, no delay"
    last = [r.result for r in rows if r.tau == 0.3]
    sim.render_plots([ideal] + last, out / f"tau0.3_{kind}", sim.preset_path(kind))

print("\nplots and tables in", out)
