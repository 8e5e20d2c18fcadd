#!/usr/bin/env python3
"""Offline stand-in for the planner's chat-completions endpoint.

Speaks the exact wire protocol the LlmClient uses: POST a chat-completions
body, get back {"choices":[{"message":{"content": <JSON subtask array>}}]}.
The reply is computed by re-parsing the instruction and world summary out of
the prompt and running the same closed-grammar expansion the rule-based
planner performs, so hybrid runs behave identically with --planner llm
pointed here.

Usage: mock_llm_server.py [--port 8089]
"""

import argparse
import json
import re
from http.server import BaseHTTPRequestHandler, HTTPServer

COLORS = {"red", "green", "blue", "yellow"}
SHAPES = {"cube", "sphere", "platform", "obstacle"}
LOCATIONS = {"home", "center"}


class PlanFailure(Exception):
    pass


def tokenize(text):
    return [t for t in re.sub(r",", " , ", text.lower()).split() if t]


def ref(color=None, shape=None, name=None):
    out = {}
    if color:
        out["color"] = color
    if shape:
        out["shape"] = shape
    if name:
        out["name"] = name
    return out


class Parser:
    """Commands separated by and/then/,; see the grammar in the README."""

    def __init__(self, tokens):
        self.toks = tokens
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, *expected):
        tok = self.peek()
        if tok is None or (expected and tok not in expected):
            raise PlanFailure(f"expected {'/'.join(expected) or 'a token'}, got {tok!r}")
        self.pos += 1
        return tok

    def opt(self, word):
        if self.peek() == word:
            self.pos += 1
            return True
        return False

    def object_ref(self):
        self.opt("the")
        color = self.take() if self.peek() in COLORS else None
        shape = self.take(*SHAPES)
        return ref(color, shape)

    def move_target(self):
        self.opt("the")
        if self.peek() in LOCATIONS:
            return {"location": self.take()}
        color = self.take() if self.peek() in COLORS else None
        shape = self.take(*SHAPES)
        return ref(color, shape)

    def command(self, grasped):
        verb = self.take("pick", "grasp", "place", "put", "move", "sort", "avoid")
        if verb == "pick":
            self.take("up")
            r = self.object_ref()
            return ("pick", r), r
        if verb == "grasp":
            r = self.object_ref()
            return ("grasp", r), r
        if verb == "place":
            if not self.opt("it"):
                raise PlanFailure("place needs 'it'")
            if grasped is None:
                raise PlanFailure("'it' has no antecedent")
            self.take("on")
            return ("place", self.object_ref(), grasped), grasped
        if verb == "put":
            obj = self.object_ref()
            self.take("on")
            return ("put", self.object_ref(), obj), obj  # (target, carried), like place
        if verb == "move":
            self.take("to")
            return ("move", self.move_target()), grasped
        if verb == "sort":
            self.opt("the")
            plural = self.take()
            if not plural.endswith("s") or plural[:-1] not in SHAPES:
                raise PlanFailure(f"expected a plural shape, got {plural!r}")
            self.take("by")
            self.take("color")
            return ("sort", plural[:-1]), grasped
        self.opt("the")
        return ("avoid", self.object_ref()), grasped

    def parse(self):
        cmds = []
        grasped = None
        cmd, grasped = self.command(grasped)
        cmds.append(cmd)
        while self.peek() is not None:
            sep = self.take("and", "then", ",")
            if sep == "," and self.peek() in ("and", "then"):
                self.pos += 1
            cmd, grasped = self.command(grasped)
            cmds.append(cmd)
        return cmds


def resolve(r, world, graspable_only):
    objs = world["objects"]
    if "name" in r:
        hits = [o for o in objs if o["id"] == r["name"]]
    else:
        hits = [
            o
            for o in objs
            if ("color" not in r or o["color"] == r["color"])
            and ("shape" not in r or o["shape"] == r["shape"])
        ]
    if graspable_only:
        hits = [o for o in hits if o["graspable"]]
    text = " ".join(r.get(k, "") for k in ("color", "shape", "name")).strip() or "object"
    if not hits:
        raise PlanFailure(f"unresolvable reference: {text}")
    if len(hits) > 1:
        raise PlanFailure(f"ambiguous reference: {text}")
    return hits[0]


class Expander:
    def __init__(self, world):
        self.world = world
        self.out = []
        self.held = world["robot"]["held"]
        self.pending_avoid = None

    def emit_move(self, target):
        if "location" not in target:
            resolve(target, self.world, False)
        if self.pending_avoid is not None:
            self.out.append(
                {"op": "avoid_region", "obstacle": self.pending_avoid, "then": target}
            )
            self.pending_avoid = None
        else:
            self.out.append({"op": "move_to", "target": target})

    def grasp(self, r):
        obj = resolve(r, self.world, True)
        if self.held == obj["id"]:
            return
        self.emit_move(r)
        self.out.append({"op": "grasp", "object": r})
        self.held = obj["id"]

    def place(self, target, held_ref):
        self.grasp(held_ref)
        resolve(target, self.world, False)
        self.emit_move(target)
        self.out.append({"op": "release"})
        self.held = None

    def sort(self, shape):
        items = sorted(
            (o for o in self.world["objects"] if o["shape"] == shape and o["graspable"]),
            key=lambda o: o["id"],
        )
        if not items:
            raise PlanFailure(f"unresolvable reference: no graspable {shape}")
        items.sort(key=lambda o: o["id"] != self.held)  # finish the held one first
        for o in items:
            self.place(ref(o["color"], "platform"), ref(name=o["id"]))

    def expand(self, cmds):
        for cmd in cmds:
            kind = cmd[0]
            if kind in ("pick", "grasp"):
                self.grasp(cmd[1])
            elif kind in ("place", "put"):
                self.place(cmd[1], cmd[2])
            elif kind == "move":
                self.emit_move(cmd[1])
            elif kind == "sort":
                self.sort(cmd[1])
            else:
                resolve(cmd[1], self.world, False)
                self.pending_avoid = cmd[1]
        if self.pending_avoid is not None:
            raise PlanFailure("avoid must be followed by a command that moves")
        return self.out


def plan_from_prompt(prompt):
    world_match = re.search(r"World:\n(.*?)\n\nInstruction: (.*?)\n", prompt, re.S)
    if not world_match:
        raise PlanFailure("prompt is missing the world or instruction section")
    world = json.loads(world_match.group(1))
    cmds = Parser(tokenize(world_match.group(2))).parse()
    return Expander(world).expand(cmds)


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        prompt = body["messages"][0]["content"]
        try:
            content = json.dumps(
                plan_from_prompt(prompt), sort_keys=True, separators=(",", ":")
            )
        except PlanFailure as e:
            content = f"I cannot plan that: {e}"
        reply = {"choices": [{"message": {"content": content}}]}
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):  # quiet by default
        pass


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--port", type=int, default=8089)
    args = ap.parse_args()
    server = HTTPServer(("127.0.0.1", args.port), Handler)
    print(f"mock planner listening on http://127.0.0.1:{args.port}/v1/chat/completions")
    server.serve_forever()


if __name__ == "__main__":
    main()
