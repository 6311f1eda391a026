import json
import math
import random
import sys


def main():
    data = json.loads(sys.stdin.read())
    req = data["requirements"]
    cat = data["catalog"]
    n = req["n_variables"]
    lo, hi = req["cardinality_bounds"]
    prec = req["precedence"]
    mutex = req["mutex"]
    groups = req["groups"]
    variables = cat["variables"]
    inter = cat["interactions"]

    def value(sel):
        total = sum(variables[i]["weight"] for i in sel)
        for a in range(len(sel)):
            for b in range(a + 1, len(sel)):
                key = f"{min(sel[a], sel[b])},{max(sel[a], sel[b])}"
                total += inter.get(key, 0.0)
        return total

    def is_feasible(sel):
        for i, j in prec:
            if j in sel and i not in sel:
                return False
        for a, b in mutex:
            if a in sel and b in sel:
                return False
        for members in groups.values():
            if len([m for m in members if m in sel]) > 1:
                return False
        return lo <= len(sel) <= hi

    sel = random.sample(range(n), random.randint(lo, hi))
    while not is_feasible(sel):
        sel = random.sample(range(n), random.randint(lo, hi))
    cur = value(sel)
    T = 1000
    cooling_rate = 0.995
    while T > 1:
        new_sel = sel[:]
        if random.random() < 0.5 and len(new_sel) < hi:
            new_sel.append(random.choice(list(set(range(n)) - set(new_sel))))
        elif len(new_sel) > lo:
            new_sel.remove(random.choice(new_sel))
        if is_feasible(new_sel):
            new_val = value(new_sel)
            delta = new_val - cur
            if delta > 0 or random.random() < math.exp(delta / T):
                sel = new_sel
                cur = new_val
        T *= cooling_rate
    print(json.dumps({"selection": {"variables": sel}}))


if __name__ == "__main__":
    main()
