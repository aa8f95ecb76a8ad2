"""Corpus management: synthesize a labeled mini-corpus, inspect its class
distribution, and assign speaker-disjoint train/dev/test splits.

Run from the repository root; writes under demos/_out/.
"""

from collections import Counter
from pathlib import Path

from sauti.corpus import (
    class_distribution,
    filter_classes,
    load_manifest,
    save_manifest,
    speaker_disjoint_split,
)
from sauti.synthgen import SynthSpec, generate

out = Path(__file__).parent / "_out" / "corpus"
spec = SynthSpec(n_classes=4, speakers_per_class=5, utterances_per_speaker=4, seed=3)
manifest = generate(spec, out)
print("generated %d utterances across %s" % (len(manifest), manifest.class_set))
print("distribution:", class_distribution(manifest))

# keep the three best-covered accents, as a real experiment would
manifest = filter_classes(manifest, {"edo", "yoruba", "igbo"})
print("after filtering:", class_distribution(manifest))

# speakers never straddle splits; fractions apply to utterance counts at
# speaker granularity with a greedy cut
split = speaker_disjoint_split(manifest, fractions=(0.8, 0.1, 0.1), seed=12)
counts = Counter(r.split for r in split.records)
print("split sizes:", dict(counts))

speakers_per_split = {}
for record in split.records:
    speakers_per_split.setdefault(record.split, set()).add(record.speaker_id)
for name, speakers in sorted(speakers_per_split.items()):
    print("  %-5s %2d speakers" % (name, len(speakers)))
overlap = set.intersection(*speakers_per_split.values())
print("speaker overlap across splits:", overlap or "none")

save_manifest(split, out / "manifest.jsonl")
reloaded = load_manifest(out / "manifest.jsonl")
print("manifest round-trips: %d records" % len(reloaded))
