"""Published benchmark data for the ten-scenario retention experiment.

Bundled so the statistics layer can be checked against known results
without any LLM calls or training: per-scenario question/fact/example
accounting, and per-scenario accuracy for the cycle-3 compaction and
consolidated (epoch 8) conditions.
"""

from __future__ import annotations

# scenario -> (semantic, procedural, episodic) question counts, fact count
# (union of three passes over original + three continuations), training
# example count synthesized from those facts.
DATASET_ACCOUNTING: dict[str, dict] = {
    "cli-developer-tool": {
        "label": "CLI Developer Tool",
        "questions": {"semantic": 16, "procedural": 11, "episodic": 75},
        "facts": 816,
        "train_examples": 16286,
    },
    "data-pipeline": {
        "label": "Data Pipeline",
        "questions": {"semantic": 20, "procedural": 15, "episodic": 78},
        "facts": 870,
        "train_examples": 17366,
    },
    "ml-training": {
        "label": "ML Training",
        "questions": {"semantic": 27, "procedural": 11, "episodic": 65},
        "facts": 881,
        "train_examples": 17571,
    },
    "monitoring-dashboard": {
        "label": "Monitoring Dashboard",
        "questions": {"semantic": 16, "procedural": 17, "episodic": 74},
        "facts": 975,
        "train_examples": 19450,
    },
    "web-frontend": {
        "label": "Web Frontend",
        "questions": {"semantic": 16, "procedural": 26, "episodic": 84},
        "facts": 923,
        "train_examples": 18441,
    },
    "game-development": {
        "label": "Game Development",
        "questions": {"semantic": 21, "procedural": 12, "episodic": 90},
        "facts": 976,
        "train_examples": 19472,
    },
    "devops-infrastructure": {
        "label": "DevOps Infrastructure",
        "questions": {"semantic": 16, "procedural": 10, "episodic": 90},
        "facts": 912,
        "train_examples": 18192,
    },
    "scientific-computing": {
        "label": "Scientific Computing",
        "questions": {"semantic": 13, "procedural": 13, "episodic": 91},
        "facts": 924,
        "train_examples": 18353,
    },
    "security-scanner": {
        "label": "Security Scanner",
        "questions": {"semantic": 15, "procedural": 18, "episodic": 77},
        "facts": 942,
        "train_examples": 18756,
    },
    "distributed-systems": {
        "label": "Distributed Systems",
        "questions": {"semantic": 24, "procedural": 21, "episodic": 84},
        "facts": 979,
        "train_examples": 19506,
    },
}

SCENARIO_IDS = list(DATASET_ACCOUNTING)

# Per-scenario accuracy (%) at cycle-3 compaction and the epoch-8
# consolidated checkpoint, by memory type plus the per-scenario overall.
PER_CONVERSATION_ACCURACY: dict[str, dict[str, dict[str, float]]] = {
    "cli-developer-tool": {
        "cycle3": {"semantic": 56.2, "procedural": 27.3, "episodic": 45.3, "overall": 45.1},
        "consolidated": {"semantic": 87.5, "procedural": 81.8, "episodic": 88.0, "overall": 87.3},
    },
    "data-pipeline": {
        "cycle3": {"semantic": 65.0, "procedural": 53.3, "episodic": 19.2, "overall": 31.9},
        "consolidated": {"semantic": 95.0, "procedural": 86.7, "episodic": 79.5, "overall": 83.2},
    },
    "ml-training": {
        "cycle3": {"semantic": 63.0, "procedural": 81.8, "episodic": 41.5, "overall": 51.5},
        "consolidated": {"semantic": 96.3, "procedural": 81.8, "episodic": 76.9, "overall": 82.5},
    },
    "monitoring-dashboard": {
        "cycle3": {"semantic": 87.5, "procedural": 35.3, "episodic": 33.8, "overall": 42.1},
        "consolidated": {"semantic": 100.0, "procedural": 52.9, "episodic": 77.0, "overall": 76.6},
    },
    "web-frontend": {
        "cycle3": {"semantic": 75.0, "procedural": 23.1, "episodic": 31.0, "overall": 34.9},
        "consolidated": {"semantic": 100.0, "procedural": 69.2, "episodic": 70.2, "overall": 73.8},
    },
    "game-development": {
        "cycle3": {"semantic": 52.4, "procedural": 16.7, "episodic": 16.7, "overall": 22.8},
        "consolidated": {"semantic": 95.2, "procedural": 66.7, "episodic": 74.4, "overall": 77.2},
    },
    "devops-infrastructure": {
        "cycle3": {"semantic": 68.8, "procedural": 50.0, "episodic": 38.9, "overall": 44.0},
        "consolidated": {"semantic": 100.0, "procedural": 70.0, "episodic": 78.9, "overall": 81.0},
    },
    "scientific-computing": {
        "cycle3": {"semantic": 46.2, "procedural": 7.7, "episodic": 25.3, "overall": 25.6},
        "consolidated": {"semantic": 92.3, "procedural": 76.9, "episodic": 84.6, "overall": 84.6},
    },
    "security-scanner": {
        "cycle3": {"semantic": 60.0, "procedural": 11.1, "episodic": 27.3, "overall": 29.1},
        "consolidated": {"semantic": 93.3, "procedural": 83.3, "episodic": 74.0, "overall": 78.2},
    },
    "distributed-systems": {
        "cycle3": {"semantic": 45.8, "procedural": 57.1, "episodic": 35.7, "overall": 41.1},
        "consolidated": {"semantic": 83.3, "procedural": 76.2, "episodic": 78.6, "overall": 79.1},
    },
}


def column(condition: str, category: str = "overall") -> list[float]:
    """One per-scenario column, in scenario order."""
    return [PER_CONVERSATION_ACCURACY[s][condition][category] for s in SCENARIO_IDS]


# Aggregate reference rows (mean, SE) for the floor and ceiling conditions,
# which have no published per-scenario breakdown.
AGGREGATE_ROWS = {
    "no_context": {
        "semantic": (31.8, 4.7),
        "procedural": (9.1, 2.7),
        "episodic": (7.7, 1.0),
        "overall": (11.8, 1.0),
    },
    "full_context": {
        "semantic": (91.1, 1.7),
        "procedural": (93.0, 1.7),
        "episodic": (89.3, 1.0),
        "overall": (90.1, 0.9),
    },
}

FLOOR_OVERALL = 11.8
CEILING_OVERALL = 90.1
