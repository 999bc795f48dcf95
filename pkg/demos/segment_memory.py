"""Relative-position attention with segment memory.

A long token stream is encoded in two halves, the second attending to cached
states of the first. With one layer the cached inputs are exactly what a
single pass over the whole stream would see, so the outputs coincide.
"""

import numpy as np

from lyrnet.encoder import EncoderConfig, TransformerEncoder, init_parameters
from lyrnet.rng import make_rng

cfg = EncoderConfig(vocab_size=50, n_layers=1, d_model=32, n_heads=2, d_ff=64, dropout_p=0.0,
                    max_seq_len=64, memory_len=32)
encoder = TransformerEncoder(cfg, init_parameters(cfg, make_rng(0)))
tokens = make_rng(1).integers(2, 50, size=64)

full, _ = encoder.encode(tokens)
_, memory = encoder.encode(tokens[:32])
second, _ = encoder.encode(tokens[32:], memory)
print("memory lengths per layer:", [s.shape[0] for s in memory.states])
print("max |segmented - single pass| on the second half:", np.abs(second.data - full.data[32:]).max())

# without memory the second half loses its left context
alone, _ = encoder.encode(tokens[32:])
print("max |no memory - single pass|:", np.abs(alone.data - full.data[32:]).max())
