"""Deterministic stand-in for a chat model, served through httpx.MockTransport.

Each exam question has a canonical worked solution. A prompt is matched to
the closest canonical question by word overlap; the further it drifts from
that question, the more of the solution is dropped or rewritten. Edits are
drawn from an RNG seeded by the request text, so responses are a pure
function of the request.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re

import httpx

CANON: dict[str, tuple[str, list[str]]] = {
    "q1": (
        "Find the gradient ∇f of f(x, y) = x^2y at point (-1, 4).",
        [
            "Differentiate f with respect to x: f_x = 2xy.",
            "Differentiate f with respect to y: f_y = x^2.",
            "So the gradient is ∇f = <2xy, x^2>.",
            "Substitute the point (-1, 4): ∇f(-1, 4) = <2(-1)(4), (-1)^2>.",
            "Simplify to get ∇f(-1, 4) = <-8, 1>.",
        ],
    ),
    "q2": (
        "Compute the directional derivative of g(x, y) = x^2 + 3y^2 at (1, 2) in the direction of v = <3, 4>.",
        [
            "Compute the partial derivatives: g_x = 2x and g_y = 6y.",
            "Evaluate the gradient at (1, 2): ∇g(1, 2) = <2, 12>.",
            "Normalize the direction: |v| = sqrt(3^2 + 4^2) = 5, so u = <3/5, 4/5>.",
            "The directional derivative is D_u g = ∇g . u = 6/5 + 48/5 = 54/5.",
        ],
    ),
    "q3": (
        "Evaluate the integral of 2x e^(x^2) from x = 0 to x = 1.",
        [
            "Let u = x^2, so du = 2x dx.",
            "Substitute to rewrite the integral as ∫ e^u du from u = 0 to u = 1.",
            "Integrate: the antiderivative of e^u is e^u.",
            "Evaluate from 0 to 1: e^1 - e^0 = e - 1.",
        ],
    ),
    "q4": (
        "Find the critical points of h(x, y) = x^3 - 3x + y^2 and classify each.",
        [
            "Compute the partial derivatives: h_x = 3x^2 - 3 and h_y = 2y.",
            "Solve h_x = 0 and h_y = 0 to get x = 1 or x = -1 and y = 0.",
            "The critical points are (1, 0) and (-1, 0).",
            "Compute the second derivatives: h_xx = 6x, h_yy = 2, h_xy = 0.",
            "Evaluate D = h_xx h_yy - h_xy^2 = 12x at each point.",
            "At (1, 0) D = 12 > 0 with h_xx > 0, a local minimum; at (-1, 0) D = -12 < 0, a saddle point.",
        ],
    ),
    "q5": (
        "Determine the limit of (x^2 - 9)/(x - 3) as x approaches 3.",
        [
            "Direct substitution gives 0/0, so we simplify first.",
            "Factor the numerator: x^2 - 9 = (x - 3)(x + 3).",
            "Cancel the common factor to get x + 3 for x != 3.",
            "The limit as x approaches 3 is 3 + 3 = 6.",
        ],
    ),
    "q6": (
        "Use the chain rule to differentiate y = sin(3x^2).",
        [
            "Write y = sin(u) with u = 3x^2.",
            "Differentiate the outer function: dy/du = cos(u).",
            "Differentiate the inner function: du/dx = 6x.",
            "By the chain rule dy/dx = cos(3x^2) * 6x = 6x cos(3x^2).",
        ],
    ),
    "q7": (
        "Find the maximum area of a rectangle with perimeter 40.",
        [
            "Let the width be w and the length be L with 2w + 2L = 40.",
            "Solve for L: L = 20 - w.",
            "The area is A(w) = w(20 - w) = 20w - w^2.",
            "Differentiate: A'(w) = 20 - 2w, which is 0 at w = 10.",
            "Substitute w = 10 to get L = 10, so the maximum area is 100.",
        ],
    ),
    "q8": (
        "Compute the partial derivatives of f(x, y) = e^(xy) + ln(x).\n(a) Find f_x.\n(b) Find f_y.",
        [
            "Differentiate with respect to x, holding y fixed: f_x = y e^(xy) + 1/x.",
            "Differentiate with respect to y, holding x fixed: f_y = x e^(xy).",
            "Evaluate nothing further; both partial derivatives are defined for x > 0.",
        ],
    ),
}

# Generic replacements for steps the "model" loses track of under a perturbed prompt.
REWRITES = [
    "Since the problem statement is incomplete here, we keep the expression in general form.",
    "We restate the goal before continuing: identify what is being asked and the given data.",
    "Without the specific values, the answer is left in symbolic form.",
    "We check the previous line for consistency before moving on.",
]
CONTEXT_STEP = "Recall the relevant definition from the reference material."


def _words(text: str) -> set[str]:
    return set(re.findall(r"\w+", text.lower()))


def _question_of(user: str) -> tuple[str, bool]:
    marker = "\nQuestion:\n"
    if marker in user:
        return user.split(marker, 1)[1], True
    return user, False


def _closest(question: str) -> tuple[str, float]:
    words = _words(question)
    best, best_sim = "q1", -1.0
    for qid, (canon, _) in CANON.items():
        cw = _words(canon)
        sim = len(words & cw) / len(words | cw) if words | cw else 0.0
        if sim > best_sim:
            best, best_sim = qid, sim
    return best, best_sim


def respond(system_text: str, user_text: str) -> str:
    question, has_context = _question_of(user_text)
    qid, sim = _closest(question)
    canon, steps = CANON[qid]
    steps = list(steps)
    drift = 1.0 - sim
    if question.strip() != canon:
        drift = max(drift, 0.05)
    seed = hashlib.sha256((system_text + "\x00" + user_text).encode("utf-8")).hexdigest()
    rng = random.Random(seed)
    edits = min(len(steps) - 1, math.ceil(drift * len(steps) * 2))
    for _ in range(edits):
        i = rng.randrange(len(steps))
        if rng.random() < 0.5 and len(steps) > 2:
            del steps[i]
        else:
            steps[i] = rng.choice(REWRITES)
    if has_context:
        steps.insert(0, CONTEXT_STEP)
    return "\n".join(f"Step {n}: {s}" for n, s in enumerate(steps, start=1))


def handler(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    messages = {m["role"]: m["content"] for m in body["messages"]}
    text = respond(messages.get("system", ""), messages["user"])
    return httpx.Response(200, json={"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})


def transport() -> httpx.MockTransport:
    return httpx.MockTransport(handler)
