"""Pipeline stages over a run directory.

The run directory is the engine's only persistence mechanism: every stage
reads prerequisite artifacts from it, writes its own artifacts into it, and
drops a completion marker. Re-running a completed stage is a no-op;
deleting a marker and re-running reproduces identical artifacts under the
replay provider.
"""

from __future__ import annotations

import json
import logging
import shutil
import subprocess
from pathlib import Path

import yaml

from . import prompt_templates
from .analysis import CEStats, EpochSweep, ce_stats, emit_report
from .compaction import run_cycles
from .config import RunConfig, resolve_path
from .corpus import (
    Conversation,
    Manifest,
    load_corpus,
    read_conversation,
    read_facts,
    read_ndjson,
    read_questions,
    write_conversation,
    write_facts,
    write_questions,
    validate_run_inputs,
)
from .errors import ConfigError, DependencyError, EngineError
from .evaluation import (
    Condition,
    EvalArtifacts,
    collect_answers,
    ingest_answers,
    judge,
    read_judgments,
    score,
    write_answers,
    write_judgments,
)
from .provider import HttpChatProvider, Provider, ProviderConfig, ReplayProvider
from .reflection import build_fact_inventory
from .synthesis import assemble_training_set

log = logging.getLogger(__name__)


def make_provider(config: RunConfig, base: Path, mode: str | None = None) -> Provider:
    settings = config.provider
    mode = mode or settings.mode
    if mode == "replay":
        if not settings.fixture_dir:
            raise ConfigError("replay provider requires provider.fixture_dir")
        return ReplayProvider(resolve_path(base, settings.fixture_dir))
    if mode == "live":
        if not settings.endpoint_url:
            raise ConfigError("live provider requires provider.endpoint_url")
        return HttpChatProvider(
            ProviderConfig(
                endpoint_url=settings.endpoint_url,
                auth_token_env_var=settings.auth_token_env_var,
                max_concurrent=settings.max_concurrent,
                max_retries=settings.max_retries,
                backoff_base=settings.backoff_base,
                cache_dir=resolve_path(base, settings.cache_dir) if settings.cache_dir else None,
            )
        )
    raise ConfigError(f"unknown provider mode {mode!r}")


def _safe(name: str) -> str:
    return name.replace(":", "-").replace("/", "_")


class Run:
    """One experiment run bound to a run directory."""

    def __init__(
        self,
        run_dir: Path,
        config: RunConfig,
        *,
        config_base: Path,
        provider_mode: str | None = None,
        conversation_filter: str | None = None,
    ):
        self.run_dir = Path(run_dir)
        self.config = config
        self.config_base = Path(config_base)
        self.conversation_filter = conversation_filter
        self._provider: Provider | None = None
        self._provider_mode = provider_mode
        self.run_dir.mkdir(parents=True, exist_ok=True)

    @property
    def provider(self) -> Provider:
        if self._provider is None:
            self._provider = make_provider(self.config, self.config_base, self._provider_mode)
        return self._provider

    # -- markers -----------------------------------------------------------

    def _marker(self, stage: str) -> Path:
        return self.run_dir / "markers" / f"{stage}.done"

    def is_complete(self, stage: str) -> bool:
        return self._marker(stage).exists()

    def _complete(self, stage: str) -> None:
        marker = self._marker(stage)
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text("done\n", encoding="utf-8")

    def _require(self, stage: str) -> None:
        if not self.is_complete(stage):
            raise DependencyError(f"stage {stage!r} has not completed (missing marker)")

    # -- loading helpers ---------------------------------------------------

    def conversations(self) -> list[Conversation]:
        convs = load_corpus(self.run_dir / "corpus")
        if self.conversation_filter:
            convs = [c for c in convs if c.id == self.conversation_filter]
            if not convs:
                raise ConfigError(f"no conversation with id {self.conversation_filter!r}")
        return convs

    def questions(self):
        return read_questions(self.run_dir / "questions.ndjson")

    def _continuations(self, conv_id: str) -> list[Conversation]:
        base = self.run_dir / "compact" / conv_id
        out = []
        for cycle_dir in sorted(base.glob("cycle_*")):
            path = cycle_dir / "continuation.json"
            if path.exists():
                out.append(read_conversation(path))
        return out

    # -- stages ------------------------------------------------------------

    def ingest(self) -> bool:
        if self.is_complete("ingest"):
            log.info("ingest already complete")
            return False
        corpus_dir = resolve_path(self.config_base, self.config.corpus_dir)
        conversations = load_corpus(corpus_dir)
        questions = read_questions(resolve_path(self.config_base, self.config.questions_file))
        report = validate_run_inputs(conversations, questions)
        for warning in report.warnings:
            log.warning("%s", warning)
        for conv in conversations:
            write_conversation(self.run_dir / "corpus" / f"{_safe(conv.id)}.json", conv)
        write_questions(self.run_dir / "questions.ndjson", questions)
        (self.run_dir / "config.resolved.yaml").write_text(
            yaml.safe_dump(self.config.to_dict(), sort_keys=True), encoding="utf-8"
        )
        (self.run_dir / "prompts.sha256").write_text(
            json.dumps(prompt_templates.checksums(), indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (self.run_dir / "validation.json").write_text(
            json.dumps(
                {"per_conversation": report.per_conversation, "totals": report.totals},
                indent=1,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        self._complete("ingest")
        return True

    def compact(self) -> bool:
        if self.is_complete("compact"):
            log.info("compact already complete")
            return False
        self._require("ingest")
        settings = self.config.compaction
        for conv in self.conversations():
            states = run_cycles(
                self.provider,
                conv,
                settings.cycles,
                ratio=settings.ratio,
                continuation_target=settings.continuation_target_tokens,
                model_tag=self.config.provider.pipeline_model,
            )
            for state in states:
                out = self.run_dir / "compact" / conv.id / f"cycle_{state.cycle_index}"
                out.mkdir(parents=True, exist_ok=True)
                (out / "summary.txt").write_text(state.summary, encoding="utf-8")
                write_conversation(out / "continuation.json", state.continuation)
                (out / "context.txt").write_text(state.context_for_eval, encoding="utf-8")
                (out / "tokens.json").write_text(
                    json.dumps(
                        {
                            "input_tokens": state.input_tokens,
                            "summary_tokens": state.summary_tokens,
                            "continuation_tokens": state.continuation.token_count,
                        },
                        indent=1,
                    ),
                    encoding="utf-8",
                )
        self._complete("compact")
        return True

    def reflect(self) -> bool:
        if self.is_complete("reflect"):
            log.info("reflect already complete")
            return False
        self._require("ingest")
        # the fact inventory spans the original plus its continuations
        self._require("compact")
        for conv in self.conversations():
            inventory = build_fact_inventory(
                self.provider,
                conv,
                self._continuations(conv.id),
                model_tag=self.config.provider.pipeline_model,
                passes=self.config.reflection.passes,
            )
            write_facts(self.run_dir / "reflect" / f"facts_{_safe(conv.id)}.ndjson", inventory)
        self._complete("reflect")
        return True

    def synthesize(self) -> bool:
        if self.is_complete("synthesize"):
            log.info("synthesize already complete")
            return False
        self._require("reflect")
        for conv in self.conversations():
            facts = read_facts(self.run_dir / "reflect" / f"facts_{_safe(conv.id)}.ndjson")
            assemble_training_set(
                self.provider,
                conv.id,
                facts,
                self.config.manifest,
                self.run_dir / "synth" / conv.id,
                n=self.config.synthesis.n_paraphrases,
                model_tag=self.config.provider.pipeline_model,
                temperature=self.config.synthesis.temperature,
            )
        self._complete("synthesize")
        return True

    def train(self, epochs: int | None = None) -> bool:
        if self.is_complete("train"):
            log.info("train already complete")
            return False
        self._require("synthesize")
        trainer = self.config.trainer
        train_dir = self.run_dir / "train"
        train_dir.mkdir(parents=True, exist_ok=True)
        if trainer.command:
            manifest = self.config.manifest
            if epochs is not None:
                manifest = Manifest.from_dict({**manifest.to_dict(), "epochs": epochs})
            for conv in self.conversations():
                out = train_dir / conv.id
                out.mkdir(parents=True, exist_ok=True)
                manifest_path = out / "manifest.json"
                manifest_path.write_text(
                    json.dumps(manifest.to_dict(), indent=1), encoding="utf-8"
                )
                argv = list(trainer.command) + [
                    str(self.run_dir / "synth" / conv.id / "training_set.ndjson"),
                    str(manifest_path),
                    str(self.run_dir / "questions.ndjson"),
                    str(out),
                ]
                result = subprocess.run(argv)
                if result.returncode != 0:
                    raise EngineError(
                        f"trainer failed for {conv.id} (exit {result.returncode})"
                    )
        elif trainer.answers_file:
            src = resolve_path(self.config_base, trainer.answers_file)
            if not src.exists():
                raise ConfigError(f"trainer answers file not found: {src}")
            shutil.copy(
                src, train_dir / f"answers_consolidated_{trainer.answers_epoch}.ndjson"
            )
        else:
            (train_dir / "INPUTS.md").write_text(
                "Trainer inputs emitted per conversation under synth/<id>/:\n"
                "training_set.ndjson and manifest.json. No trainer was configured,\n"
                "so no consolidated answers are available for evaluation.\n",
                encoding="utf-8",
            )
        self._complete("train")
        return True

    def _eval_artifacts(self, condition: Condition) -> EvalArtifacts:
        artifacts = EvalArtifacts()
        for conv in self.conversations():
            artifacts.originals[conv.id] = conv
            if condition.kind == "compaction":
                contexts = {}
                base = self.run_dir / "compact" / conv.id
                for cycle_dir in sorted(base.glob("cycle_*")):
                    idx = int(cycle_dir.name.split("_")[1])
                    contexts[idx] = (cycle_dir / "context.txt").read_text(encoding="utf-8")
                artifacts.cycle_contexts[conv.id] = contexts
        return artifacts

    def _consolidated_answers_file(self, epoch: int) -> Path:
        train_dir = self.run_dir / "train"
        merged = train_dir / f"answers_consolidated_{epoch}.ndjson"
        if merged.exists():
            return merged
        per_conv = sorted(train_dir.glob(f"*/answers_epoch_{epoch}.ndjson"))
        if per_conv:
            # concatenate the per-conversation trainer exports
            from .corpus import write_ndjson

            records = []
            for path in per_conv:
                records.extend(read_ndjson(path, "answer"))
            write_ndjson(merged, "answer", records)
            return merged
        raise DependencyError(
            f"no consolidated answers for epoch {epoch}; run the train stage "
            "with a trainer command or an answers file"
        )

    def evaluate(self, condition_name: str) -> bool:
        condition = Condition.parse(condition_name)
        stage = f"evaluate_{_safe(condition.name)}"
        if self.is_complete(stage):
            log.info("%s already complete", stage)
            return False
        self._require("ingest")
        if condition.kind == "compaction":
            self._require("compact")
        if condition.kind == "consolidated":
            self._require("train")
        questions = self.questions()
        if self.conversation_filter:
            questions = [q for q in questions if q.conversation_id == self.conversation_filter]
        artifacts = self._eval_artifacts(condition)
        if condition.kind == "consolidated":
            answers = ingest_answers(
                self._consolidated_answers_file(condition.epoch), condition, questions
            )
        else:
            answers = collect_answers(
                self.provider,
                condition,
                questions,
                artifacts,
                model_tag=self.config.provider.subject_model,
            )
        by_id = {q.id: q for q in questions}
        judgments = [
            judge(
                self.provider,
                by_id[a.question_id],
                a,
                judge_model_tag=self.config.provider.pipeline_model,
            )
            for a in answers
        ]
        eval_dir = self.run_dir / "eval"
        write_answers(eval_dir / f"answers_{_safe(condition.name)}.ndjson", answers)
        write_judgments(eval_dir / f"judgments_{_safe(condition.name)}.ndjson", judgments)
        self._complete(stage)
        return True

    def analyze(self) -> bool:
        if self.is_complete("analyze"):
            log.info("analyze already complete")
            return False
        self._require("ingest")
        questions = self.questions()
        eval_dir = self.run_dir / "eval"
        judgment_files = sorted(eval_dir.glob("judgments_*.ndjson"))
        if not judgment_files:
            raise DependencyError("no judgments found; run evaluate first")
        scores: dict[str, dict] = {}
        for path in judgment_files:
            condition_name = path.stem.removeprefix("judgments_").replace("-", ":")
            record = score(read_judgments(path), questions)
            scores[condition_name] = {
                "accuracy": record.accuracy,
                "error_rate": record.error_rate,
                "counts": record.counts,
            }
        out = self.run_dir / "analysis"
        out.mkdir(parents=True, exist_ok=True)
        (out / "scores.json").write_text(
            json.dumps(scores, indent=1, sort_keys=True), encoding="utf-8"
        )
        self._complete("analyze")
        return True

    def _build_sweep(self) -> EpochSweep | None:
        scores_path = self.run_dir / "analysis" / "scores.json"
        scores = json.loads(scores_path.read_text(encoding="utf-8"))
        sweep = EpochSweep()
        for name, record in scores.items():
            if not name.startswith("consolidated:"):
                continue
            epoch = int(name.split(":")[1])
            passes = fails = 0
            for by_cat in record["counts"].values():
                cell = by_cat.get("overall", {})
                passes += cell.get("pass", 0)
                fails += cell.get("fail", 0)
            if passes + fails:
                sweep.fail_rates[epoch] = 100.0 * fails / (passes + fails)
            ces: list[float] = []
            for path in sorted(self.run_dir.glob(f"train/*/ce_epoch_{epoch}.ndjson")):
                for rec in read_ndjson(path, "ce_log"):
                    ces.extend(rec.get("token_ces", []))
            if ces:
                sweep.ce[epoch] = ce_stats(ces, epoch)
        return sweep if sweep.fail_rates else None

    def report(self) -> bool:
        if self.is_complete("report"):
            log.info("report already complete")
            return False
        self._require("analyze")
        scores = json.loads(
            (self.run_dir / "analysis" / "scores.json").read_text(encoding="utf-8")
        )
        per_conversation = {name: record["accuracy"] for name, record in scores.items()}
        compaction_conds = sorted(
            (n for n in scores if n.startswith("compaction:")),
            key=lambda n: int(n.split(":")[1]),
        )
        consolidated_conds = sorted(
            (n for n in scores if n.startswith("consolidated:")),
            key=lambda n: int(n.split(":")[1]),
        )
        compare = None
        if compaction_conds and consolidated_conds:
            compare = (compaction_conds[-1], consolidated_conds[-1])
        emit_report(
            self.run_dir / "report",
            per_conversation,
            sweep=self._build_sweep(),
            compare=compare,
        )
        self._complete("report")
        return True

    def run_all(self, epochs_sweep: int | None = None) -> None:
        self.ingest()
        self.compact()
        self.reflect()
        self.synthesize()
        self.train(epochs=epochs_sweep)
        conditions = list(self.config.evaluate.conditions)
        if epochs_sweep and self.config.trainer.command:
            conditions = [c for c in conditions if not c.startswith("consolidated")]
            conditions += [f"consolidated:{e}" for e in range(1, epochs_sweep + 1)]
        for condition in conditions:
            self.evaluate(condition)
        self.analyze()
        self.report()
