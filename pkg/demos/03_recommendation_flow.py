"""End-to-end recommendation: reasoning, template refinement, trie decode.

A scripted mock stands in for the model service, so the whole flow runs
deterministically on any machine.
"""

import json

from instrec import (
    HashedBagEmbedder,
    MockBackend,
    MockScript,
    Modality,
    RecommendationPipeline,
    RetrievalConfig,
    ScriptEntry,
    TemplateLibrary,
    Trigger,
    build_vocabulary,
    tokenize_library,
)

SURFACES = ["add calendar event", "create reminder", "navigate to place"]

vocab = build_vocabulary(SURFACES)
library = tokenize_library(
    [(s.replace(" ", "-"), s) for s in SURFACES], vocab
)

templates = TemplateLibrary(HashedBagEmbedder())
templates.add_seed(
    templates.build_template(
        "tmpl-hotel",
        "Hotel Reservation Information Extraction",
        ["travel", "reservation", "hotel"],
        "Booking confirmations for hotel stays",
        [
            "Extract hotel name and address",
            "Identify check-in and check-out dates",
            "Note room type and number of guests",
            "Recommend calendar reminder for the stay",
        ],
    )
)

# The script answers three kinds of requests: initial reasoning, refined
# reasoning (once a template was retrieved), and per-step token scores.
gold_path_logits = [0.0] * vocab.size
for token in (*vocab.tokenize("add calendar event"), vocab.specials.end_of_sequence):
    gold_path_logits[token] = 10.0

script = MockScript(
    [
        ScriptEntry(
            match="## Refine trigger\nHotel reservation",
            text=(
                "<REASONING>\n"
                "[Entity Recognition] hotel name check-in march 3 check-out march 5 room type double\n"
                "[Contextual Relevance] the full stay belongs in the calendar\n"
                "[Instruction Generation] add calendar event for the stay\n"
                "</REASONING>"
            ),
        ),
        ScriptEntry(
            match="## Trigger\nHotel reservation",
            text=(
                "<REASONING>\n"
                "[Entity Recognition] hotel reservation with hotel name and check-in date\n"
                "[Contextual Relevance] travel booking for a hotel stay needs a calendar reminder\n"
                "[Instruction Generation] recommend calendar reminder for the reservation\n"
                "</REASONING>"
            ),
        ),
        ScriptEntry(match="mode: score_tokens", logits=tuple(gold_path_logits)),
    ]
)

pipeline = RecommendationPipeline(
    library, vocab, MockBackend(script, vocab_size=vocab.size), templates
)

trigger = Trigger(
    id="demo-hotel",
    modality=Modality.TEXT,
    text="Hotel reservation confirmed: Grandview Inn, check-in March 3",
)

result = pipeline.infer(trigger, RetrievalConfig(delta=0.6), k=3)
print(json.dumps(result.to_dict(), indent=2))
print()
print("template used:", result.template_used)
print("refined reasoning mentions check-out:", "check-out" in result.reasoning.raw)
print("top recommendation:", result.instructions[0])
