"""Constrained decoding walkthrough.

Builds a prefix tree over a small instruction library and shows that any
scorer, however hostile, can only ever produce registered instructions.
"""

import numpy as np

from instrec import build_trie, build_vocabulary, tokenize_library

SURFACES = [
    "save phone number",
    "save address",
    "navigate to station",
    "add calendar event",
]

vocab = build_vocabulary(SURFACES)
library = tokenize_library([(f"instr-{n}", s) for n, s in enumerate(SURFACES)], vocab)
trie = build_trie(library, vocab)

print("vocabulary:", dict(zip(vocab.id_to_token, range(vocab.size))))
print()

# The trie exposes, for any prefix, exactly the token ids that keep the
# sequence inside the library.
for prefix_text in ["", "save", "save phone"]:
    prefix = vocab.tokenize(prefix_text) if prefix_text else []
    options = sorted(vocab.id_to_token[t] for t in trie.valid_next(prefix))
    print(f"after {prefix_text!r:24} the decoder may emit {options}")
print()

# A scorer maps a token prefix to one logit per vocabulary entry. This one
# likes the words of "save phone number".
def preference_scorer(prefix):
    logits = np.zeros(vocab.size)
    for word, weight in [("save", 5.0), ("phone", 4.0), ("number", 3.0)]:
        logits[vocab.token_to_id[word]] = weight
    logits[vocab.specials.end_of_sequence] = 1.0
    return logits


instr_id, score = trie.constrained_decode(preference_scorer)
print(f"greedy decode: {instr_id} (score {score})")

for instr_id, score in trie.top_k_decode(preference_scorer, k=3):
    print(f"  ranked: {instr_id:10} {score:7.2f}")
print()

# Even a random scorer cannot escape the library: every logit outside the
# current node's children is masked to -inf before the argmax.
rng = np.random.RandomState(0)
decoded = {
    trie.constrained_decode(lambda prefix: rng.uniform(-10, 10, vocab.size))[0]
    for _ in range(200)
}
print("200 random scorers decoded:", sorted(decoded))
print("all registered:", decoded <= {i.id for i in library})
