"""Joint training against one model per task, on the same splits.

Prints a markdown table of test accuracy and macro-F1 for each arm. With only
20 test songs one split is noisy; the two arms converge as the corpus grows
(``lyrnet ablate`` on 200 songs puts them level).
"""

from lyrnet.corpus import generate_synthetic
from lyrnet.experiments import ablation, format_ablation_table
from lyrnet.heads import HeadConfig
from lyrnet.training import TrainingConfig

docs = generate_synthetic(25, vocab_size=200, seed=1)
encoder = dict(n_layers=2, n_heads=2, d_model=32, d_ff=64, dropout_p=0.1, max_seq_len=1024, memory_len=0)
result = ablation(docs, [0.8, 0.2], seeds=[0], encoder=encoder, heads=HeadConfig(),
                  config=TrainingConfig.desk(epochs=40))
print(format_ablation_table(result))
