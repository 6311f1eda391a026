import json
import sys


def main():
    data = json.loads(sys.stdin.read())
    weights = [v["weight"] for v in data["catalog"]["variables"]]
    lo, hi = data["requirements"]["cardinality_bounds"]
    order = sorted(range(len(weights)), key=lambda i: -weights[i])
    chosen = [i for i in order[:hi] if weights[i] > 0]
    if len(chosen) < lo:
        chosen = order[:lo]
    print(json.dumps({"selection": {"variables": sorted(chosen)}}))


main()
