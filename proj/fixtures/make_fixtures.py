"""Regenerate ieee39.json and mini3.json.

Network lines and generator data follow the standard 39-bus case. Crew travel
times are synthetic (see README.md in this directory).
"""

import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent

lines = """1 2 0.0411
1 39 0.025
2 3 0.0151
2 25 0.0086
2 30 0.0181
3 4 0.0213
3 18 0.0133
4 5 0.0128
4 14 0.0129
5 6 0.0026
5 8 0.0112
6 7 0.0092
6 11 0.0082
6 31 0.025
7 8 0.0046
8 9 0.0363
9 39 0.025
10 11 0.0043
10 13 0.0043
10 32 0.02
12 11 0.0435
12 13 0.0435
13 14 0.0101
14 15 0.0217
15 16 0.0094
16 17 0.0089
16 19 0.0195
16 21 0.0135
16 24 0.0059
17 18 0.0082
17 27 0.0173
19 20 0.0138
19 33 0.0142
20 34 0.018
21 22 0.014
22 23 0.0096
22 35 0.0143
23 24 0.035
23 36 0.0272
25 26 0.0323
25 37 0.0232
26 27 0.0147
26 28 0.0474
26 29 0.0625
28 29 0.0151
29 38 0.0156"""
line_list = []
for ln in lines.splitlines():
    a, b, x = ln.split()
    line_list.append({"from": int(a), "to": int(b), "reactance": float(x)})
G = list(range(30, 40)); Ld = list(range(1, 30))
H = {30:42.0,31:30.3,32:35.8,33:28.6,34:26.0,35:34.8,36:26.4,37:24.3,38:34.5,39:500.0}
KP = dict(zip(G, [10,4.5,4.5,1,5,4,3,2,4,5]))
PLS = {3:322,4:500,7:233.8,8:522,12:7.5,15:320,16:329,18:158,20:628,21:274,23:247.5,24:308.6,25:224,26:139,27:281,28:206,29:283.5}
PLV = {1:0.84, 9:0.80, 19:0.70, 20:0.80, 28:0.80, 29:1.00}
gens = [{"bus": g, "inertia": round(H[g]/25, 6), "damping": 6.0, "kp": KP[g], "ki": 6.0} for g in G]
loads = []
for b in Ld:
    d = {"bus": b, "damping": 1.0, "secure_load": PLS.get(b, 0.0)/100.0}
    if b in PLV: d["max_vulnerable_load"] = PLV[b]
    loads.append(d)

def travel(nodes, pos, speed, extra):
    n = len(nodes); T = [[0.0]*n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j: continue
            d = math.dist(pos[nodes[i]], pos[nodes[j]])
            T[i][j] = max(0.5, round(2*(d/speed + extra))/2)
    return T

# Synthetic service-area coordinates (arbitrary units); depots share a yard.
pos = {1:(-2,3), 9:(-1,4.5), 19:(4,-1), 20:(5.5,-2), 28:(-4,-3), 29:(-3,-4.5), 'st':(0,0), 'en':(0.3,0.3)}

def case(name, attacked, sensors, bounds, repair, crews, horizon):
    nodes = attacked + ['st', 'en']
    crew_docs = []
    for c, (speed, extra) in enumerate(crews):
        crew_docs.append({"name": f"crew-{c+1}", "repair_times": [repair[c][b] for b in attacked],
                          "travel_times": travel(nodes, pos, speed, extra)})
    return {
        "name": name,
        "buses": list(range(1, 40)),
        "generators": gens, "loads": loads, "lines": line_list,
        "attack": {"omega_max": 0.04,
                   "buses": [{"bus": b, "sensor": s, "gain_bound": k} for b, s, k in zip(attacked, sensors, bounds)]},
        "ibr": {"power_margin": 0.0, "units": [
            {"bus": 8, "sensor": 39, "gain_min": 0.0, "gain_max": 15.0, "p_ref": 1.0, "p_max": 1.6},
            {"bus": 29, "sensor": 38, "gain_min": 0.0, "gain_max": 15.0, "p_ref": 1.0, "p_max": 1.6}]},
        "crews": {"start_depot": "st", "end_depot": "en", "crews": crew_docs},
        "planner": {"horizon": horizon, "step_minutes": 30, "samples": 4, "big_m": 1e4, "epsilon": 1e-4,
                    "stability_margin": 0.1, "estimation_threshold": 0.1,
                    "weights": [round(0.01*PLV[b], 6) for b in attacked], "droop_cost_rate": 254}}

R1 = {1:3.5, 9:3.0, 19:3.0, 20:3.5, 28:3.5, 29:4.0}
R2 = {1:3.5, 9:3.5, 19:4.0, 20:4.5, 28:3.0, 29:4.5}
full = case("ieee39", [1,9,19,20,28,29], [39,39,33,34,38,38], [11,9,14,10,12,9], [R1, R2],
            [(3.0, 0.25), (2.5, 0.25)], 20)
mini = case("ieee39-mini3", [9,28,29], [39,38,38], [9,12,9], [R1], [(3.0, 0.25)], 20)
json.dump(full, open(HERE / 'ieee39.json', 'w'), indent=1)
json.dump(mini, open(HERE / 'mini3.json', 'w'), indent=1)
