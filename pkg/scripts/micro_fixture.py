"""Micro-fixture definitions: a desk-scale corpus, question bank, and a
deterministic scripted provider used to record the bundled replay fixtures.

Everything here is pure and deterministic so the recorded fixture set is
reproducible byte-for-byte. Tests import this module for the frozen
expected values (question bank, per-cell accuracy design).
"""

from __future__ import annotations

from consolidation.corpus import (
    Conversation,
    MemoryType,
    TestQuestion,
    Turn,
    count_tokens,
)
from consolidation.provider import ChatRequest, ChatResponse

CONV_ID = "cli-tool-micro"
SCENARIO = "CLI Developer Tool (micro)"

JUDGE_ERROR_TRIGGER = "(unjudgeable)"

_FILLER = (
    "We also talked through logging levels, the structure of the integration "
    "test suite, and how the command registry discovers subcommands at import "
    "time. None of that changed any decisions made earlier in the session. "
)


def _pad(text: str, target_bytes: int) -> str:
    while len(text.encode("utf-8")) < target_bytes:
        text += _FILLER
    return text


def original_conversation() -> Conversation:
    turns = [
        Turn(
            "user",
            "hey, starting fresh on the CLI tool today. I want to add a scheduled "
            "task runner -- basically a `devtool schedule` command that can "
            "register cron-like jobs and run them. you register one with "
            "`devtool schedule add lint --cron '0 * * * *'` and it persists to a "
            "JSON file, then `devtool schedule run` executes any jobs that are "
            "due. two ground rules for this project in general: I want a short "
            "plan before code, every time. and always confirm before destructive "
            "operations like deleting schedules.",
        ),
        Turn(
            "assistant",
            _pad(
                "Got it -- plan first, and I'll confirm before anything "
                "destructive. Here's the plan:\n\n"
                "1. Persist schedules at ~/.devtool/schedules.json -- each entry "
                "has a name, cron expression, command, and last-run timestamp\n"
                "2. Use the croniter library to evaluate whether a job is due\n"
                "3. `devtool schedule add` writes to the JSON store\n"
                "4. `devtool schedule run` iterates jobs, checks due-ness, "
                "executes via subprocess\n\n"
                "Sketch of devtool/scheduler.py:\n\n"
                "```python\n"
                "import json\nimport subprocess\nfrom pathlib import Path\n\n"
                "import click\nfrom croniter import croniter\n\n"
                "STORE = Path.home() / '.devtool' / 'schedules.json'\n\n"
                "def loadSchedules():\n    return json.loads(STORE.read_text())\n"
                "```\n",
                1400,
            ),
        ),
        Turn(
            "user",
            "few things -- first, please use snake_case for function names, not "
            "camelCase. loadSchedules should be load_schedules etc. second, what "
            "happens if two `devtool schedule run` invocations overlap, like a "
            "cron firing twice before the first finishes? can that corrupt the "
            "schedules.json?",
        ),
        Turn(
            "assistant",
            _pad(
                "Good catch on the naming -- snake_case from here on.\n\n"
                "And yes, overlapping invocations absolutely can corrupt "
                "schedules.json: both processes read the store, both run the due "
                "job, and whichever writes last wins, losing the other's update. "
                "Worse, an interrupted write leaves a truncated file.\n\n"
                "Two fixes, both going in now:\n"
                "1. Take an exclusive file mutex before reading or writing the "
                "store -- acquire fcntl.flock on a .lock file next to it.\n"
                "2. To avoid truncation, write to a temporary file and os.replace "
                "it over schedules.json, which is atomic on POSIX.\n",
                1600,
            ),
        ),
        Turn(
            "user",
            "nice. while you're in there, the run command needs to sign its "
            "completion webhooks. compute an HMAC-SHA256 of the payload with our "
            "shared secret -- what's the one-shot way to do that in python?",
        ),
        Turn(
            "assistant",
            _pad(
                "Use hmac.digest(secret, payload, hashlib.sha256) for one-shot "
                "HMAC generation:\n\n"
                "```python\nimport hashlib\nimport hmac\n\n"
                "sig = hmac.digest(secret, payload, hashlib.sha256)\n```\n\n"
                "It's a single call and faster than building a streaming object "
                "when you have the whole payload in hand.\n",
                1200,
            ),
        ),
        Turn(
            "user",
            "great. let's wire the lock into both commands and add a couple of "
            "tests for the overlap case before we call it done.",
        ),
        Turn(
            "assistant",
            _pad(
                "Plan: add a lock() context manager around both `devtool schedule "
                "add` and `devtool schedule run`, then two tests -- one spawning "
                "overlapping runners against a temp store, one asserting the "
                "store survives a simulated mid-write kill. Implementing now.\n",
                1400,
            ),
        ),
    ]
    return Conversation.build(id=CONV_ID, scenario=SCENARIO, turns=turns)


QUESTIONS = [
    TestQuestion("q01", CONV_ID, MemoryType.SEMANTIC,
                 "What naming convention should Python function names use in this project?",
                 "snake_case"),
    TestQuestion("q02", CONV_ID, MemoryType.SEMANTIC,
                 "What does the user want to see before any code is written?",
                 "a short plan before code"),
    TestQuestion("q03", CONV_ID, MemoryType.SEMANTIC,
                 "What should happen before running a destructive operation?",
                 "confirm before destructive operations"),
    TestQuestion("q04", CONV_ID, MemoryType.PROCEDURAL,
                 "How do you prevent overlapping schedule runs from corrupting the store?",
                 "fcntl.flock"),
    TestQuestion("q05", CONV_ID, MemoryType.PROCEDURAL,
                 "What is the one-shot way to compute an HMAC-SHA256 in Python here?",
                 "hmac.digest(secret, payload, hashlib.sha256)"),
    TestQuestion("q06", CONV_ID, MemoryType.PROCEDURAL,
                 "How should the schedule store be written to avoid truncation?",
                 "write to a temporary file and os.replace"),
    TestQuestion("q07", CONV_ID, MemoryType.EPISODIC,
                 "Where does the CLI tool persist its schedules?",
                 "~/.devtool/schedules.json"),
    TestQuestion("q08", CONV_ID, MemoryType.EPISODIC,
                 "Which library evaluates cron expressions in the scheduler?",
                 "croniter"),
    TestQuestion("q09", CONV_ID, MemoryType.EPISODIC,
                 "Besides name, cron expression and command, what field does each schedule entry keep?",
                 "last-run timestamp"),
    TestQuestion("q10", CONV_ID, MemoryType.EPISODIC,
                 "Which subcommand registers a new scheduled job?",
                 "devtool schedule add"),
]

# expected-answer phrases the scripted compaction summary carries forward
SUMMARY_RETAINED = [
    "snake_case",
    "a short plan before code",
    "confirm before destructive operations",
    "~/.devtool/schedules.json",
]

# questions the pre-generated consolidated answers file gets right
CONSOLIDATED_PASS_IDS = {"q01", "q02", "q03", "q04", "q05", "q07", "q08", "q09"}

# hand-computed report cells implied by the design above
EXPECTED_CELLS = {
    "no_context": {"semantic": 0.0, "procedural": 0.0, "episodic": 0.0, "overall": 0.0},
    "full_context": {"semantic": 100.0, "procedural": 100.0, "episodic": 100.0, "overall": 100.0},
    "compaction:1": {"semantic": 100.0, "procedural": 0.0, "episodic": 25.0, "overall": 40.0},
    "consolidated:8": {"semantic": 100.0, "procedural": 200 / 3, "episodic": 75.0, "overall": 80.0},
}

MISS_ANSWER = "I don't have that context in front of me, so I can't say."

# answer text used in the pre-generated consolidated answers file
CONSOLIDATED_MISS = "I remember discussing the scheduler, but not that detail."

# probe pair whose judge output never carries a VERDICT line (records the
# verdict=error path in the replay fixtures)
PROBE_QUESTION = TestQuestion(
    "qerr", CONV_ID, MemoryType.PROCEDURAL,
    "What was the workaround for the flaky lock test?", "re-run with a longer timeout",
)
PROBE_ANSWER_TEXT = f"It depends on the runner {JUDGE_ERROR_TRIGGER}."

# fact whose first synthesis response comes up short, exercising the top-up path
PARTIAL_PROBE_NAME = "partial probe"
PARTIAL_PROBE_CONTENT = "Synthesis shortfall probe fact for the top-up retry path."

# fact records per extraction pass: (name, type, content)
_STORE = ("schedule store location", "episodic",
          "The devtool CLI persists schedules at ~/.devtool/schedules.json.")
_SNAKE = ("snake_case function names", "semantic",
          "User prefers snake_case for all Python function names.")
_MUTEX = ("schedule run file mutex", "procedural",
          "Overlapping `devtool schedule run` invocations corrupt schedules.json; "
          "take an exclusive fcntl.flock file mutex before touching the store.")
_CRON = ("croniter for cron parsing", "episodic",
         "The scheduler evaluates cron expressions with the croniter library.")
_PLAN = ("plan before code", "semantic",
         "User wants a short plan before code is written, every time.")
_HMAC = ("one-shot hmac generation", "procedural",
         "Use hmac.digest(secret, payload, hashlib.sha256) for one-shot HMAC "
         "generation instead of building a streaming object.")

_WEBHOOK = ("webhook listener port", "episodic",
            "The completion webhook listener runs on port 8443.")
_DOCSTR = ("google style docstrings", "semantic",
           "User prefers Google-style docstrings for public functions.")
_BACKOFF = ("retry backoff cap", "procedural",
            "Exponential retry backoff for webhook delivery must be capped at 60 "
            "seconds to avoid unbounded sleeps.")
_CSV = ("csv export format", "episodic",
        "Schedule exports are written as CSV with a header row.")

ORIGINAL_PASSES = {
    1: [_STORE, _SNAKE, _MUTEX, _CRON, _PLAN],
    2: [("Snake_Case Function Names",) + _SNAKE[1:], _HMAC, _STORE],
    3: [_PLAN, _CRON],
}
ORIGINAL_MERGED_COUNT = 6

CONTINUATION_PASSES = {
    1: [_WEBHOOK, _DOCSTR],
    2: [_BACKOFF, _WEBHOOK],
    3: [_CSV],
}
CONTINUATION_MERGED_COUNT = 4

INVENTORY_COUNT = ORIGINAL_MERGED_COUNT + CONTINUATION_MERGED_COUNT

ALL_FACTS = {name: (mtype, content) for (name, mtype, content) in
             [_STORE, _SNAKE, _MUTEX, _CRON, _PLAN, _HMAC,
              _WEBHOOK, _DOCSTR, _BACKOFF, _CSV]}

# phrases that must never leak into summaries or continuations, so the
# hand-computed compaction cells above stay valid
LEAK_FORBIDDEN = [
    "fcntl.flock",
    "hmac.digest(secret, payload, hashlib.sha256)",
    "write to a temporary file and os.replace",
    "croniter",
    "last-run timestamp",
    "devtool schedule add",
]


def _json_line(**kwargs) -> str:
    import json

    return json.dumps(kwargs, ensure_ascii=False)


class ScriptedProvider:
    """Deterministic stand-in for every model the pipeline talks to.

    Routes on the instruction header of each prompt and produces plausible,
    schema-correct output sized to satisfy the engine's budgets. Used only
    to record replay fixtures.
    """

    def complete(self, request: ChatRequest) -> ChatResponse:
        prompt = request.messages[-1].content
        system = next(
            (m.content for m in request.messages if m.role == "system"), None
        )
        if prompt.startswith("You are reviewing a long user-assistant working session"):
            content = self._reflect(prompt)
        elif prompt.startswith("You are generating rehearsal training data"):
            content = self._synthesize(prompt)
        elif prompt.startswith("You are compacting a working session"):
            content = self._summarize(prompt)
        elif prompt.startswith("You are simulating the next working session"):
            content = self._continue(prompt)
        elif prompt.startswith("You are grading whether a model's answer"):
            content = self._judge(prompt)
        else:
            content = self._answer(prompt, system)
        return ChatResponse(
            content=content,
            prompt_tokens=count_tokens(prompt),
            completion_tokens=count_tokens(content),
        )

    # -- reflection ---------------------------------------------------------

    def _reflect(self, prompt: str) -> str:
        nonce = ""
        for line in prompt.splitlines():
            if line.startswith("Extraction pass nonce: "):
                nonce = line.removeprefix("Extraction pass nonce: ")
        conv_part, _, pass_part = nonce.rpartition("-pass-")
        pass_index = int(pass_part)
        passes = (
            CONTINUATION_PASSES if "continuation" in conv_part else ORIGINAL_PASSES
        )
        facts = passes.get(pass_index, [])
        lines = [_json_line(name=n, type=t, content=c) for (n, t, c) in facts]
        return (
            "Reviewed the session; durable memories below.\n\n```facts\n"
            + "\n".join(lines)
            + "\n```\n"
        )

    # -- synthesis ----------------------------------------------------------

    def _synthesize(self, prompt: str) -> str:
        import re

        name = re.search(r"^Memory name: (.*)$", prompt, re.M).group(1)
        n = int(re.search(r"Generate exactly (\d+) two-message", prompt).group(1))
        top_up = "Top-up request:" in prompt
        if name == "partial probe":
            produced = n if top_up else max(n - 4, 0)
        else:
            produced = n
        _, content = ALL_FACTS.get(name, ("episodic", name))
        styles = ["direct", "how_to", "recall", "scenario", "negation", "task_oriented"]
        openers = {
            "direct": "Quick question:",
            "how_to": "How do I handle this:",
            "recall": "Remind me,",
            "scenario": "Suppose I'm back on this tomorrow --",
            "negation": "Is it wrong that",
            "task_oriented": "Please do the following:",
        }
        tones = ["", " Keeping it brief.", " Here's the fuller picture: it came up earlier and we settled it.",]
        lines = []
        for i in range(produced):
            style = styles[i % len(styles)]
            user = f"{openers[style]} what did we settle about {name}? (variant {i + 1})"
            assistant = content + tones[i % len(tones)]
            lines.append(_json_line(style=style, user=user, assistant=assistant))
        return (
            "Here are the rehearsal conversations.\n\n```examples\n"
            + "\n".join(lines)
            + "\n```\n"
        )

    # -- compaction ---------------------------------------------------------

    def _summarize(self, prompt: str) -> str:
        context = prompt.split("CONTEXT:\n", 1)[1]
        lines = [
            "Compacted session summary for continued work on the devtool CLI.",
            "",
            "Conventions and decisions to carry forward:",
            "- function names use snake_case",
            "- the user wants a short plan before code, every time",
            "- always confirm before destructive operations",
        ]
        if "~/.devtool/schedules.json" in context:
            lines.append("- schedules persist at ~/.devtool/schedules.json")
        if "port 8443" in context:
            lines.append("- the webhook listener runs on port 8443")
        lines += [
            "",
            "Recent work: scheduler storage and locking behaviour was settled, "
            "tests cover the overlap case, and webhook signing went in. Open "
            "items: none blocking; continue with feature work next session.",
        ]
        return "\n".join(lines)

    def _continue(self, prompt: str) -> str:
        import re

        target = int(re.search(r"Target approximately (\d+) tokens", prompt).group(1))
        filler = (
            "We reviewed the notifier queue, tightened the config parsing, and "
            "cleaned up the integration tests for the new endpoints. "
        )
        turns = []
        made = 0
        topics = [
            ("let's add a webhook notifier next. where should it listen?",
             "I'll stand the webhook listener up on port 8443 and register it in "
             "the config. Also switching new public functions to Google-style "
             "docstrings as agreed. "),
            ("delivery sometimes flakes -- what's the retry story?",
             "Exponential retry backoff for webhook delivery, capped at 60 "
             "seconds so a dead receiver can't wedge the worker. "),
            ("can we export the schedule table for the ops spreadsheet?",
             "Schedule exports are written as CSV with a header row; the command "
             "streams straight to stdout so ops can redirect it. "),
            ("anything left before we wrap this session?",
             "Just polish: docstrings on the new module and one more test around "
             "the export path. "),
        ]
        i = 0
        while made < target * 4:
            user, assistant = topics[i % len(topics)]
            user_text = f"(session follow-up {i + 1}) {user}"
            assistant_text = assistant + filler * 6
            turns.append({"role": "user", "content": user_text})
            turns.append({"role": "assistant", "content": assistant_text})
            made += len(user_text.encode()) + len(assistant_text.encode())
            i += 1
        body = _json_line(turns=turns)
        return "Continuing the project.\n\n```conversation\n" + body + "\n```\n"

    # -- judging and answering ----------------------------------------------

    def _judge(self, prompt: str) -> str:
        expected = prompt.split("EXPECTED ANSWER:\n", 1)[1].split("\n\nMODEL RESPONSE:", 1)[0]
        response = prompt.split("MODEL RESPONSE:\n", 1)[1].rsplit("\n\nExplain your reasoning", 1)[0]
        if JUDGE_ERROR_TRIGGER in response:
            return (
                "The response is ambiguous and I cannot commit to a grade either "
                "way without more information."
            )
        ok = expected.strip().casefold() in response.casefold()
        verdict = "PASS" if ok else "FAIL"
        reason = (
            "The response states the expected information."
            if ok
            else "The response does not contain the expected information."
        )
        return f"{reason}\nVERDICT: {verdict}"

    def _answer(self, prompt: str, system: str | None) -> str:
        question = next((q for q in QUESTIONS if q.question == prompt), None)
        if question is None:
            return "I'm not sure what you're asking about."
        if system is None:
            return MISS_ANSWER
        if question.expected_answer.casefold() in system.casefold():
            return f"Based on the session notes: {question.expected_answer}."
        return MISS_ANSWER
