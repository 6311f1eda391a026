import json
import sys

sys.stdin.read()
print(json.dumps({"selection": {"variables": []}}))
sys.exit(3)
