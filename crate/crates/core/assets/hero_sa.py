import json
import math
import random
import sys


def solve(data, seed=12345):
    rng = random.Random(seed)
    requirements = data["requirements"]
    catalog = data["catalog"]
    n_vars = requirements["n_variables"]
    min_card, max_card = requirements["cardinality_bounds"]
    precedence = requirements["precedence"]
    mutex = requirements["mutex"]
    groups = list(requirements["groups"].values())
    weights = [v["weight"] for v in catalog["variables"]]
    interactions = {}
    for key, value in catalog["interactions"].items():
        i, j = (int(p) for p in key.split(","))
        interactions[(min(i, j), max(i, j))] = value

    def is_feasible(sol):
        count = sum(sol)
        if count < min_card or count > max_card:
            return False
        for i, j in precedence:
            if sol[j] and not sol[i]:
                return False
        for a, b in mutex:
            if sol[a] and sol[b]:
                return False
        for members in groups:
            if sum(1 for m in members if sol[m]) > 1:
                return False
        return True

    def calculate_score(sol):
        total = sum(w for w, s in zip(weights, sol) if s)
        for (i, j), value in interactions.items():
            if sol[i] and sol[j]:
                total += value
        return total

    current_sol = None
    upper = min(max_card, n_vars)
    for _ in range(50000):
        k = rng.randint(min_card, upper) if min_card <= upper else 0
        picked = set(rng.sample(range(n_vars), k))
        candidate = [i in picked for i in range(n_vars)]
        if is_feasible(candidate):
            current_sol = candidate
            break
    if current_sol is None:
        return []

    current_score = calculate_score(current_sol)
    best_sol = current_sol[:]
    best_score = current_score
    T = 1000.0
    cooling_rate = 0.99
    n_iterations = 1000
    retry_cap = 100

    for _ in range(n_iterations):
        neighbor = current_sol[:]
        idx = rng.randint(0, n_vars - 1)
        neighbor[idx] = not neighbor[idx]
        attempts = 1
        while not is_feasible(neighbor) and attempts < retry_cap:
            idx = rng.randint(0, n_vars - 1)
            neighbor[idx] = not neighbor[idx]
            attempts += 1
        if is_feasible(neighbor):
            n_score = calculate_score(neighbor)
            delta = n_score - current_score
            if delta > 0 or rng.random() < math.exp(delta / T):
                current_sol = neighbor
                current_score = n_score
                if current_score > best_score:
                    best_sol = current_sol[:]
                    best_score = current_score
        T *= cooling_rate

    return [i for i, s in enumerate(best_sol) if s]


if __name__ == "__main__":
    payload = json.loads(sys.stdin.read())
    print(json.dumps({"selection": {"variables": solve(payload)}}))
