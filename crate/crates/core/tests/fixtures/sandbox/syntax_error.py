import json

def solve(:
    return []
