import json

import pytest

from instrec import (
    HashedBagEmbedder,
    MockBackend,
    MockScript,
    Modality,
    ReasoningTrace,
    RecommendationPipeline,
    RetrievalConfig,
    ScriptEntry,
    TemplateLibrary,
    Trigger,
    build_vocabulary,
    export_sft_dataset,
    tokenize_library,
)
from instrec import prompts
from instrec.exceptions import (
    MalformedReasoning,
    PipelineStageError,
    UnknownInstructionId,
)
from instrec.pipeline import load_sft_dataset


def load_entries(data_dir):
    with open(f"{data_dir}/instructions.json") as f:
        return [(item["id"], item["surface"]) for item in json.load(f)]


def make_pipeline(data_dir, templates=None, script_path=None):
    entries = load_entries(data_dir)
    vocab = build_vocabulary([s for _, s in entries])
    library = tokenize_library(entries, vocab)
    backend = MockBackend(
        MockScript.load(script_path or f"{data_dir}/hotel_script.json"),
        vocab_size=vocab.size,
    )
    if templates is None:
        templates = TemplateLibrary.load(
            f"{data_dir}/templates.json", HashedBagEmbedder()
        )
    return RecommendationPipeline(library, vocab, backend, templates)


@pytest.fixture
def hotel_pipeline(data_dir):
    return make_pipeline(data_dir)


@pytest.fixture
def hotel_trigger(data_dir):
    with open(f"{data_dir}/trigger_hotel.json") as f:
        return Trigger.from_dict(json.load(f))


class TestConstructReasoningSample:
    def test_scripted_trace_parses_three_stages(self, hotel_pipeline, hotel_trigger):
        gold = hotel_pipeline.instructions["add-calendar-event"]
        trace = hotel_pipeline.construct_reasoning_sample(
            prompts.construction_prompt(hotel_trigger), hotel_trigger, gold
        )
        assert len(trace.steps) == 3
        assert "grandview" in trace.steps[0].text

    def test_missing_close_delimiter(self, data_dir, hotel_trigger, tmp_path):
        script = [
            {
                "match": "## Gold instruction",
                "text": "<REASONING>\n[Entity Recognition] truncated output",
            }
        ]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(script))
        pipe = make_pipeline(data_dir, script_path=str(path))
        gold = pipe.instructions["add-calendar-event"]
        with pytest.raises(MalformedReasoning):
            pipe.construct_reasoning_sample(
                prompts.construction_prompt(hotel_trigger), hotel_trigger, gold
            )

    def test_gold_not_in_library(self, hotel_pipeline, hotel_trigger):
        from instrec import Instruction

        stranger = Instruction(id="not-registered", surface="do something else")
        with pytest.raises(UnknownInstructionId):
            hotel_pipeline.construct_reasoning_sample(
                prompts.construction_prompt(hotel_trigger), hotel_trigger, stranger
            )

    def test_prompt_without_examples_rejected(self, hotel_pipeline, hotel_trigger):
        gold = hotel_pipeline.instructions["add-calendar-event"]
        with pytest.raises(ValueError):
            hotel_pipeline.construct_reasoning_sample(
                prompts.inference_prompt(hotel_trigger), hotel_trigger, gold
            )


class TestInfer:
    def test_hotel_flow_uses_template(self, hotel_pipeline, hotel_trigger):
        result = hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=3)
        assert result.template_used == "tmpl-hotel-booking"
        assert "check-out" in result.reasoning.raw
        assert "room type" in result.reasoning.raw
        assert result.instructions[0] == "add-calendar-event"
        assert len(result.instructions) == 3

    def test_empty_template_library_falls_back(self, data_dir, hotel_trigger):
        pipe = make_pipeline(data_dir, templates=TemplateLibrary(HashedBagEmbedder()))
        result = pipe.infer(hotel_trigger, RetrievalConfig(), k=1)
        assert result.template_used is None
        # no refinement happened: the initial reasoning is kept verbatim
        assert "recommend calendar reminder" in result.reasoning.raw
        assert result.instructions[0] == "add-calendar-event"

    def test_retrieval_miss_keeps_initial_reasoning(self, data_dir, hotel_trigger):
        pipe = make_pipeline(data_dir)
        result = pipe.infer(hotel_trigger, RetrievalConfig(delta=1.0), k=1)
        assert result.template_used is None
        assert "recommend calendar reminder" in result.reasoning.raw

    def test_k3_ranks_three(self, hotel_pipeline, hotel_trigger):
        result = hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=3)
        assert result.instructions == (
            "add-calendar-event",
            "create-reminder",
            "navigate-to-place",
        )
        # every path ends on the <EOS> logit of 10; the gold path adds 3 x 10
        assert result.scores == (40.0, 10.0, 10.0)

    def test_output_closure(self, hotel_pipeline, hotel_trigger):
        result = hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=3)
        assert set(result.instructions) <= set(hotel_pipeline.instructions)

    def test_deterministic(self, hotel_pipeline, hotel_trigger):
        first = hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=3)
        second = hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=3)
        assert first == second

    def test_k_out_of_range(self, hotel_pipeline, hotel_trigger):
        with pytest.raises(ValueError):
            hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=0)
        with pytest.raises(ValueError):
            hotel_pipeline.infer(hotel_trigger, RetrievalConfig(), k=4)

    def test_k_clamped_to_library_size(self, hotel_trigger):
        vocab = build_vocabulary(["add calendar event"])
        library = tokenize_library([("only", "add calendar event")], vocab)
        backend = MockBackend(
            MockScript(
                [
                    ScriptEntry(
                        match="## Trigger",
                        text="<REASONING>\n[Entity Recognition] a booking\n</REASONING>",
                    ),
                    ScriptEntry(
                        match="mode: score_tokens", logits=tuple([0.0] * vocab.size)
                    ),
                ]
            ),
            vocab_size=vocab.size,
        )
        pipe = RecommendationPipeline(
            library, vocab, backend, TemplateLibrary(HashedBagEmbedder())
        )
        result = pipe.infer(hotel_trigger, RetrievalConfig(), k=3)
        assert result.instructions == ("only",)


class TestStageOrdering:
    def test_retrieval_consumes_initial_reasoning(self, hotel_trigger):
        """The template is chosen against the initial reasoning even when the
        refined reasoning would match a different template better."""
        surfaces = ["add calendar event"]
        vocab = build_vocabulary(surfaces)
        library = tokenize_library([("only", surfaces[0])], vocab)
        embedder = HashedBagEmbedder()
        templates = TemplateLibrary(embedder)
        # t-initial is bag-identical to the initial reasoning body words,
        # t-refined to the refined reasoning body words.
        templates.add_seed(
            templates.build_template(
                "t-initial", "alpha", ["bravo"], "charlie", ["delta"]
            )
        )
        templates.add_seed(
            templates.build_template(
                "t-refined", "echo", ["foxtrot"], "golf", ["hotel"]
            )
        )
        script = MockScript(
            [
                ScriptEntry(
                    match="## Refine trigger",
                    text="<REASONING>\n[Entity Recognition] echo foxtrot golf hotel\n</REASONING>",
                ),
                ScriptEntry(
                    match="## Trigger",
                    text="<REASONING>\n[Entity Recognition] alpha bravo charlie delta\n</REASONING>",
                ),
                ScriptEntry(match="mode: score_tokens", logits=tuple([0.0] * vocab.size)),
            ]
        )
        pipe = RecommendationPipeline(
            library, vocab, MockBackend(script, vocab_size=vocab.size), templates
        )
        result = pipe.infer(hotel_trigger, RetrievalConfig(delta=0.3), k=1)
        assert result.template_used == "t-initial"
        # and the refined reasoning, not the initial one, is what gets returned
        assert "echo foxtrot" in result.reasoning.raw


class TestStageErrors:
    def test_initial_stage_tagged(self, data_dir, hotel_trigger, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("[]")
        pipe = make_pipeline(data_dir, script_path=str(path))
        with pytest.raises(PipelineStageError) as err:
            pipe.infer(hotel_trigger, RetrievalConfig(), k=1)
        assert err.value.stage == "initial_reasoning"

    def test_refinement_stage_tagged(self, data_dir, hotel_trigger, tmp_path):
        with open(f"{data_dir}/hotel_script.json") as f:
            script = json.load(f)
        # drop the refinement entry so that stage has no answer
        script = [e for e in script if not e["match"].startswith("## Refine")]
        path = tmp_path / "norefine.json"
        path.write_text(json.dumps(script))
        pipe = make_pipeline(data_dir, script_path=str(path))
        with pytest.raises(PipelineStageError) as err:
            pipe.infer(hotel_trigger, RetrievalConfig(), k=1)
        assert err.value.stage == "refinement"

    def test_decode_stage_tagged(self, data_dir, hotel_trigger, tmp_path):
        with open(f"{data_dir}/hotel_script.json") as f:
            script = json.load(f)
        script = [e for e in script if "logits" not in e]
        path = tmp_path / "noscore.json"
        path.write_text(json.dumps(script))
        pipe = make_pipeline(data_dir, script_path=str(path))
        with pytest.raises(PipelineStageError) as err:
            pipe.infer(hotel_trigger, RetrievalConfig(), k=1)
        assert err.value.stage == "decode"


class TestExportSftDataset:
    def sample(self, n=0):
        trigger = Trigger(id=f"t{n}", modality=Modality.TEXT, text=f"message {n}")
        from instrec import Instruction

        instruction = Instruction(id="save-phone-number", surface="save phone number")
        trace = ReasoningTrace.parse(
            "<REASONING>\n"
            "[Entity Recognition] a phone number\n"
            "[Contextual Relevance] worth keeping\n"
            "[Instruction Generation] save it\n"
            "</REASONING>"
        )
        return trigger, instruction, trace

    def test_empty_list(self, tmp_path):
        path = tmp_path / "out.jsonl"
        report = export_sft_dataset([], str(path))
        assert report.written == 0
        assert path.read_text() == ""

    def test_single_sample_roundtrip(self, tmp_path):
        path = tmp_path / "out.jsonl"
        trigger, instruction, trace = self.sample()
        report = export_sft_dataset([(trigger, instruction, trace)], str(path))
        assert report.written == 1
        rows = load_sft_dataset(str(path))
        assert len(rows) == 1
        assert rows[0]["instruction"] == "save phone number"
        assert rows[0]["reasoning"] == trace.raw
        assert Trigger.from_dict(rows[0]["trigger"]) == trigger
        assert list(rows[0]) == ["trigger", "reasoning", "instruction"]

    def test_malformed_trace_skipped(self, tmp_path):
        path = tmp_path / "out.jsonl"
        good = self.sample(0)
        bad_trigger, bad_instr, bad_trace = self.sample(1)
        object.__setattr__(bad_trace, "raw", "<REASONING> broken")
        report = export_sft_dataset(
            [good, (bad_trigger, bad_instr, bad_trace)], str(path)
        )
        assert report.written == 1
        assert len(report.skipped) == 1
        assert report.skipped[0][0] == 1
