"""Template store walkthrough: gated retrieval, the novelty gate, and
distilling logged misses into new template candidates.
"""

import json

from instrec import (
    MockBackend,
    MockScript,
    ReasoningTrace,
    RetrievalConfig,
    ScriptEntry,
    HashedBagEmbedder,
    TemplateLibrary,
)

library = TemplateLibrary(HashedBagEmbedder())
library.add_seed(
    library.build_template(
        "tmpl-hotel",
        "Hotel Reservation Information Extraction",
        ["travel", "reservation", "hotel"],
        "Booking confirmations for hotel stays",
        [
            "Extract hotel name and address",
            "Identify check-in and check-out dates",
            "Recommend calendar reminder for the stay",
        ],
    )
)

# Retrieval embeds the reasoning trace and takes the similarity argmax,
# returning it only when the similarity clears the threshold.
reasoning = ReasoningTrace.parse(
    "<REASONING>\n"
    "[Entity Recognition] hotel reservation with name and check-in dates\n"
    "[Contextual Relevance] travel stay worth a calendar reminder\n"
    "[Instruction Generation] recommend a reminder for the stay\n"
    "</REASONING>"
)
for delta in (0.3, 0.6, 0.9):
    hit = library.retrieve(reasoning, RetrievalConfig(delta=delta), "demo-trigger")
    verdict = f"{hit.template.id} (sim {hit.similarity:.3f})" if hit else "no match"
    print(f"delta={delta}: {verdict}")
print()

# The novelty gate admits a candidate only when it is sufficiently far from
# everything already stored.
clone = library.build_template(
    "tmpl-hotel-2",
    "Hotel Reservation Information Extraction",
    ["travel", "reservation", "hotel"],
    "Booking confirmations for hotel stays",
    [
        "Extract hotel name and address",
        "Identify check-in and check-out dates",
        "Recommend calendar reminder for the stay",
    ],
)
fresh = library.build_template(
    "tmpl-recipe",
    "Recipe Nutrition Lookup",
    ["cooking"],
    "Photos of finished dishes",
    ["Identify the dish", "Estimate calories"],
)
for candidate in (clone, fresh):
    outcome = library.add_if_novel(candidate, RetrievalConfig(novelty_delta=0.5))
    verdict = "added" if outcome.added else "rejected"
    print(f"{candidate.id}: {verdict} (max similarity {outcome.max_similarity:.3f})")
print()

# Every retrieval miss lands in the distillation log. Clusters of similar
# misses get summarized (here by a scripted backend) into new candidates,
# which re-enter through the same gate.
misses = [
    "<REASONING>\n[Entity Recognition] train ticket with departure time\n</REASONING>",
    "<REASONING>\n[Entity Recognition] morning train ticket departure time\n</REASONING>",
]
for n, raw in enumerate(misses):
    library.retrieve(ReasoningTrace.parse(raw), RetrievalConfig(), f"miss-{n}")

summarizer = MockBackend(
    MockScript(
        [
            ScriptEntry(
                match="Summarize the recurring",
                text=json.dumps(
                    {
                        "name": "Departure Reminder",
                        "tags": ["transit"],
                        "scenarios": "Tickets with departure times",
                        "steps": ["Extract departure time", "Recommend a reminder"],
                    }
                ),
            )
        ]
    )
)
candidates = library.distill_candidates(
    library.distillation_log, summarizer, min_cluster=2
)
for candidate in candidates:
    outcome = library.add_if_novel(candidate, RetrievalConfig(novelty_delta=0.5))
    verdict = "added" if outcome.added else "rejected"
    print(f"distilled {candidate.id} ({candidate.name}): {verdict}")
print(f"library now holds {len(library)} templates")
