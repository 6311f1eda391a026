import math
import random


def anneal(score, feasible, n, k):
    sol = random.sample(range(n), k)
    cur = score(sol)
    best_sol, best_score = sol, cur
    temperature = 200.0
    alpha = 0.9
    for it in range(500):
        cand = random.sample(range(n), k)
        if not feasible(cand):
            continue
        s = score(cand)
        if s >= cur or random.random() < math.exp((s - cur) / temperature):
            sol, cur = cand, s
        if cur > best_score:
            best_sol, best_score = sol, cur
        temperature *= alpha
    return best_sol
