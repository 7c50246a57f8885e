# Shifting the cut: Wigner's friend
#
# The built-in "wigner" scenario runs two discussions. In the first, the
# friend (subsystem 2) is the subject and qubit 1 decoheres relative to
# the friend's beable. In the second, the cut moves so that 1 and 2 are
# the object and Wigner (subsystem 3) is the subject. The branches of the
# friend's beable then still show coherence. The two claims carry
# different subject tags, so they do not contradict each other.
#
# The same report is available from the command line:
#   reldec scenario --name wigner --seed 7

from reldec import resolve_scenario, run_scenario

report = run_scenario(resolve_scenario("wigner"))
for step in report.steps:
    print(step["index"], step["op"], step["split"], step["subject"])
for claim in report.claims:
    print(claim["kind"], "of", "+".join(claim["object"]), "relative to", claim["subject"])
print("contradictions:", report.contradictions, "| passed:", report.passed)

# Swapping object and subject gives the same weights: the cat (cat-i)
# and the observer (cat-ii) can each play either role.

for name in ("cat-i", "cat-ii"):
    step = next(s for s in run_scenario(resolve_scenario(name)).steps if s["op"] == "measure")
    print(name, "object", step["object"], "weights", [round(v["weight"], 3) for v in step["values"]])
