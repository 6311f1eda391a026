import math
import random


def anneal(score, is_feasible, start, n_vars):
    solution = start[:]
    best_value = score(solution)
    best_solution = solution[:]
    T = 1000.0
    cooling = 0.99
    for _ in range(1000):
        neighbor_solution = solution[:]
        k = random.randint(0, n_vars - 1)
        neighbor_solution[k] = not neighbor_solution[k]
        while not is_feasible(neighbor_solution):
            k = random.randint(0, n_vars - 1)
            neighbor_solution[k] = not neighbor_solution[k]
        neighbor_value = score(neighbor_solution)
        if neighbor_value > best_value or \
           random.random() < math.exp( \
               (neighbor_value - best_value) / T):
            solution = neighbor_solution[:]
            if neighbor_value > best_value:
                best_value = neighbor_value
                best_solution = solution[:]
        T *= cooling
    return best_solution
