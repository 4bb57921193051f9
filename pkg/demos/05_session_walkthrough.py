"""A scripted decision session against the HTTP service.

The operator sees the hourly vitals, asks for the what-if risk panel
(computed by the exact oracle in coarse mode), and commits a decision;
the true generative process draws what happens next. Here the script
plays a simple strategy: continue vaginal delivery until the next-hour
risk (estimand 7) crosses a threshold, then perform the cesarean.
"""
from fastapi.testclient import TestClient

from laborsim.service import create_app

client = TestClient(create_app())

session = client.post("/sessions", json={"seed": 991, "mode": "coarse"}).json()
sid = session["session_id"]
print(f"session {sid[:8]}  seed {session['seed']}  mode {session['mode']}")
print()

THRESHOLD = 0.08
while True:
    state = session["state"]
    print(f"hour {session['k']:>2}: FHR {state['fhr']:<24} dilatation {state['dilatation']:>2} cm  "
          f"sbp {state['sbp']}")
    risks = client.get(f"/sessions/{sid}/risks", params={"estimands": "5,6,7"})
    if risks.status_code != 200:
        print("  (no risks: session ended)")
        break
    panel = {e["estimand_id"]: e for e in risks.json()["estimates"]}
    print(f"  vaginal throughout:      {panel[5]['p']:.4f}")
    print(f"  vaginal now, then usual: {panel[6]['p']:.4f}")
    print(f"  next-hour risk:          {panel[7]['p']:.4f}")

    action = "cesarean" if panel[7]["p"] > THRESHOLD else "continue_vaginal"
    print(f"  decision: {action}")
    r = client.post(f"/sessions/{sid}/decision",
                    json={"action": action, "at_hour": session["k"]})
    session = r.json()
    for event in session["new_events"]:
        print(f"  -> hour {event['hour']}: {event['event']}")
    if session["terminated"]:
        break

print()
final = client.get(f"/sessions/{sid}/state").json()
outcome = "adverse outcome" if final["state"]["y"] else ("born" if final["state"]["born"] else "horizon reached")
print(f"final: hour {final['k']}, {outcome}")
print(f"event log: {final['events']}")
