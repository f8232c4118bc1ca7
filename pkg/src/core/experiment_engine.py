"""
Experiment engine for neutrosophic-eval.
Drives an OpenAI-compatible endpoint over the model x stimulus x strategy x repetition grid,
archiving every raw exchange to NDJSON before anything is parsed.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from src.core.errors import SchemaError
from src.core.prompt_templates import Strategy, build_prompt
from src.core.stimuli import get_stimulus
from src.integrations.chat_completions_api import ChatCompletionsClient, build_chat_payload, http_error_status
from src.utils.config import read_api_key
from src.utils.helpers import to_json_line, utc_now
from src.utils.logger import logger, tracer

TRANSCRIPT_SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class RawTranscript:
    """One request/response exchange exactly as it went over the wire."""

    model: str
    stimulus: str
    strategy: Strategy
    rep: int
    request_payload: str
    response_text: str
    status: str
    http_status: int = 0
    attempts: int = 1
    finish_reason: str = ""
    started_at: str = field(default="", compare=False)
    finished_at: str = field(default="", compare=False)

    def cell(self):
        return (self.model, self.stimulus, self.strategy.value)

    def to_dict(self):
        return {
            "kind": "transcript",
            "model": self.model,
            "stimulus": self.stimulus,
            "strategy": self.strategy.value,
            "rep": self.rep,
            "request_payload": self.request_payload,
            "response_text": self.response_text,
            "status": self.status,
            "http_status": self.http_status,
            "attempts": self.attempts,
            "finish_reason": self.finish_reason,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            model=data["model"],
            stimulus=data["stimulus"],
            strategy=Strategy.parse(data["strategy"]),
            rep=int(data["rep"]),
            request_payload=data["request_payload"],
            response_text=data.get("response_text") or "",
            status=data["status"],
            http_status=int(data.get("http_status") or 0),
            attempts=int(data.get("attempts") or 1),
            finish_reason=data.get("finish_reason") or "",
            started_at=data.get("started_at") or "",
            finished_at=data.get("finished_at") or "",
        )


class RunArchive:
    """Append-only collection of transcripts plus the config snapshot of the run."""

    def __init__(self, config_snapshot, transcripts=()):
        self.config_snapshot = dict(config_snapshot)
        self._transcripts = list(transcripts)

    @property
    def transcripts(self):
        return tuple(self._transcripts)

    def append(self, transcript):
        self._transcripts.append(transcript)

    def __len__(self):
        return len(self._transcripts)

    def __iter__(self):
        return iter(self._transcripts)

    def cells(self):
        return {transcript.cell() for transcript in self._transcripts}

    def in_grid_order(self):
        """
        Returns a copy sorted into the grid order of the embedded config snapshot.
        Cells the snapshot does not name sort after the grid by (model, stimulus, strategy, rep).
        """
        snapshot = self.config_snapshot
        models = [entry["slug"] if isinstance(entry, dict) else entry for entry in snapshot.get("models", ())]
        grid = [
            (model, stimulus, strategy)
            for model in models
            for stimulus in snapshot.get("stimuli", ())
            for strategy in snapshot.get("strategies", ())
        ]
        position = {cell: index for index, cell in enumerate(grid)}

        def sort_key(transcript):
            cell = transcript.cell()
            return (position.get(cell, len(position)), cell, transcript.rep)

        return RunArchive(snapshot, sorted(self._transcripts, key=sort_key))

    def missing_cells(self, config):
        """
        Lists the grid cells of a RunConfig that have no transcript in this archive.

        Args:
            config (RunConfig): The grid the archive was supposed to cover.

        Returns:
            list: (model slug, stimulus id, strategy value) tuples in grid order.
        """
        present = self.cells()
        missing = [cell for cell in grid_cells(config) if cell not in present]
        for model, stimulus, strategy in missing:
            logger.warning(f"Archive has no transcripts for cell {model}/{stimulus}/{strategy}.")
        return missing

    def is_complete(self, config):
        return len(self._transcripts) == config.grid_size() and not self.missing_cells(config)


def grid_cells(config):
    return [
        (model.slug, stimulus, strategy.value)
        for model in config.models
        for stimulus in config.stimuli
        for strategy in config.strategies
    ]


class TranscriptWriter:
    """Single writer for the NDJSON archive; each line is flushed as soon as it is written."""

    def __init__(self, path, config_snapshot):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8", newline="\n")
        self._write({"kind": "run_header", "schema_version": TRANSCRIPT_SCHEMA_VERSION, "config": config_snapshot})

    def _write(self, obj):
        self._handle.write(to_json_line(obj))
        self._handle.flush()

    def write(self, transcript):
        self._write(transcript.to_dict())

    def close(self):
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


class ExperimentEngine:
    def __init__(self, config, client=None, api_key=None, clock=utc_now):
        """
        Initializes the engine for one run configuration.

        Args:
            config (RunConfig): Grid and transport parameters.
            client (ChatCompletionsClient, optional): Transport; built from config when omitted.
            api_key (str, optional): Bearer token; read from config.api_key_env when omitted.
            clock (callable): Returns timestamps for the transcripts.
        """
        self.config = config
        if client is None:
            key = api_key or read_api_key(config.api_key_env)
            client = ChatCompletionsClient(
                base_url=config.base_url,
                api_key=key,
                timeout=config.request_timeout,
                retry_limit=config.retry_limit,
                retry_base_delay=config.retry_base_delay,
            )
        self.client = client
        self._clock = clock
        logger.info(
            f"ExperimentEngine initialized: {config.grid_size()} evaluations, parallelism {config.parallelism}."
        )

    def execute_cell(self, model, stimulus, strategy):
        """
        Runs every repetition of one cell, in repetition order.

        Args:
            model (ModelSpec): Model to query.
            stimulus (StimulusSpec): Statement to evaluate.
            strategy (Strategy): Prompt strategy.

        Returns:
            list[RawTranscript]: Exactly config.repetitions transcripts; transport failures are statuses.
        """
        strategy = Strategy.parse(strategy)
        pair = build_prompt(strategy, stimulus.statement)
        payload = build_chat_payload(
            model.slug, pair, self.config.temperature, self.config.max_tokens_for(model), self.config.top_p
        )
        transcripts = []
        with tracer.start_as_current_span("ExecuteCell") as span:
            span.set_attribute("model", model.slug)
            span.set_attribute("stimulus", stimulus.id)
            span.set_attribute("strategy", strategy.value)
            for rep in range(1, self.config.repetitions + 1):
                started_at = self._clock()
                try:
                    result = self.client.complete(payload)
                    status, text, http_status = result.status, result.text, result.http_status
                    attempts, finish_reason = result.attempts, result.finish_reason
                except Exception as e:  # a broken transport must not take down the run
                    logger.error(f"Transport raised for {model.slug}/{stimulus.id}/{strategy.value}/{rep}: {e}")
                    status, text, http_status, attempts, finish_reason = http_error_status(0), "", 0, 1, ""
                transcripts.append(
                    RawTranscript(
                        model=model.slug,
                        stimulus=stimulus.id,
                        strategy=strategy,
                        rep=rep,
                        request_payload=payload.decode("utf-8"),
                        response_text=text,
                        status=status,
                        http_status=http_status,
                        attempts=attempts,
                        finish_reason=finish_reason,
                        started_at=started_at,
                        finished_at=self._clock(),
                    )
                )
            failures = sum(1 for t in transcripts if t.status != "ok")
            span.set_attribute("transport_failures", failures)
        logger.info(f"Cell {model.slug}/{stimulus.id}/{strategy.value} finished ({failures} transport failures).")
        return transcripts

    def _cells(self):
        return [
            (model, get_stimulus(stimulus_id), strategy)
            for model in self.config.models
            for stimulus_id in self.config.stimuli
            for strategy in self.config.strategies
        ]

    def run(self, archive_path=None):
        """
        Runs the full grid with up to config.parallelism cells in flight.
        Each cell is appended and flushed by a single writer on the calling thread as soon as it completes,
        so the NDJSON file is in completion order.

        Args:
            archive_path (str | Path, optional): NDJSON file to stream transcripts into.

        Returns:
            RunArchive: All transcripts in grid order plus the config snapshot.
        """
        snapshot = self.config.to_snapshot()
        archive = RunArchive(snapshot)
        writer = TranscriptWriter(archive_path, snapshot) if archive_path else None
        try:
            with ThreadPoolExecutor(max_workers=self.config.parallelism) as executor:
                futures = [executor.submit(self.execute_cell, *cell) for cell in self._cells()]
                for future in as_completed(futures):
                    for transcript in future.result():
                        archive.append(transcript)
                        if writer:
                            writer.write(transcript)
        finally:
            if writer:
                writer.close()
        logger.info(f"Run finished: {len(archive)} transcripts archived.")
        return archive.in_grid_order()


def execute_cell(model, stimulus, strategy, config, client=None):
    """Runs one cell; see ExperimentEngine.execute_cell."""
    return ExperimentEngine(config, client=client).execute_cell(model, stimulus, strategy)


def run_experiment(config, archive_path=None, client=None, api_key=None):
    """Runs a whole grid; raises StartupError when no client is given and the API key is unset."""
    return ExperimentEngine(config, client=client, api_key=api_key).run(archive_path)


def read_run_header(data, path=None):
    if data.get("kind") != "run_header":
        raise SchemaError("first line must be a run_header object", line=1, path=path)
    version = str(data.get("schema_version", ""))
    if version.split(".")[0] != TRANSCRIPT_SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported transcript schema version {version!r}", column="schema_version", line=1, path=path)
    return data.get("config") or {}
