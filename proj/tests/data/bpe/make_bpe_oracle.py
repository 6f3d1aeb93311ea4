"""Trains a small byte-level BPE on CI-log-like text and freezes reference
token counts from the Hugging Face `tokenizers` implementation.

Regenerate with: python3 make_bpe_oracle.py  (writes merges.txt, counts.json)
"""
import json
import random

from tokenizers import Tokenizer, models, pre_tokenizers, trainers, decoders

random.seed(11)
words = ["Task", "FAILED", "error", "Exception", "BUILD", "gradle", "compile", "Kotlin",
         "warning", "Downloading", "https://repo.maven.org/maven2/", "androidx", "at", "com.example",
         "java.lang.NullPointerException", "Execution", "failed", "for", "task", "':app:compileDebugKotlin'",
         "e:", "file:///home/runner/work/app/src/main/java/Main.kt:42:17", "Unresolved", "reference",
         "##[error]Process", "completed", "with", "exit", "code", "1.", "npm", "ERR!", "it's", "we're",
         "don't", "café", "naïve", "日本語", "テスト", "3.14159", "2025-05-01", "0x7fff", "\tindent", "  ", "--"]
corpus = []
for _ in range(4000):
    n = random.randint(3, 14)
    corpus.append(" ".join(random.choice(words) for _ in range(n)))

tok = Tokenizer(models.BPE())
tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False, use_regex=True)
tok.decoder = decoders.ByteLevel()
trainer = trainers.BpeTrainer(vocab_size=700, min_frequency=2, show_progress=False,
                              initial_alphabet=pre_tokenizers.ByteLevel.alphabet())
tok.train_from_iterator(corpus, trainer)

model = json.loads(tok.to_str())["model"]
merges = model["merges"]
with open("merges.txt", "w", encoding="utf-8") as f:
    f.write("#version: 0.2\n")
    for m in merges:
        f.write((m if isinstance(m, str) else " ".join(m)) + "\n")

samples = [
    "",
    "Task :app:compileDebugKotlin FAILED",
    "e: file:///home/runner/work/app/src/main/java/Main.kt:42:17 Unresolved reference: foo",
    "##[error]Process completed with exit code 1.",
    "java.lang.NullPointerException at com.example.Main.run(Main.java:10)",
    "Downloading https://repo.maven.org/maven2/androidx/core/1.2.3/core-1.2.3.pom",
    "it's failing because we're missing a file, don't retry",
    "  leading spaces and   internal   runs  ",
    "\ttab\tseparated\tvalues",
    "trailing space ",
    "café naïve 日本語 テスト",
    "numbers 3.14159 2025-05-01 0x7fff 1234567890",
    "npm ERR! code ELIFECYCLE",
    "punctuation!!! ??? ... ;;; ---",
    "MixedCASE camelCase snake_case kebab-case",
    "'s 't 're 've 'm 'll 'd 'x",
    "a",
    "     ",
]
for _ in range(200):
    n = random.randint(1, 10)
    samples.append(" ".join(random.choice(words) for _ in range(n)))
for _ in range(50):
    samples.append("".join(random.choice("ab c1'.-_:/\té日") for _ in range(random.randint(1, 30))))

counts = [{"text": s, "count": len(tok.encode(s).ids)} for s in samples]
with open("counts.json", "w", encoding="utf-8") as f:
    json.dump(counts, f, ensure_ascii=False, indent=0)
print(len(merges), "merges;", len(counts), "samples")
