"""End-to-end at desk scale: synthesize a corpus, train the GRU
classifier on mel features, and compare it against the untrained
random-weight baseline.

A few minutes of CPU; shrink epochs/speakers for a quicker pass.
Writes under demos/_out/.
"""

from pathlib import Path

from sauti.corpus import save_manifest, speaker_disjoint_split
from sauti.data import build_dataset
from sauti.evaluation import base_model, evaluate
from sauti.model import save_checkpoint
from sauti.synthgen import SynthSpec, generate
from sauti.training import TrainConfig, train, write_log

out = Path(__file__).parent / "_out" / "train_demo"
spec = SynthSpec(n_classes=3, speakers_per_class=6, utterances_per_speaker=6, seed=7)
manifest = generate(spec, out)
manifest = speaker_disjoint_split(manifest, seed=7)
save_manifest(manifest, out / "manifest.jsonl")

train_set, _ = build_dataset(manifest, "train", out, "mel")
dev_set, _ = build_dataset(manifest, "dev", out, "mel")
test_set, _ = build_dataset(manifest, "test", out, "mel")
print("splits: %d train / %d dev / %d test" % (len(train_set), len(dev_set), len(test_set)))

config = TrainConfig(epochs=15, hidden_size=24, seed=42, batch_size=32, lr=0.01)
best, log = train(train_set, dev_set, config, checkpoint_path=out / "best.sckp")
write_log(log, out / "log.csv")
for row in log[::5] + [log[-1]]:
    print("  epoch %2d  train %.4f  dev %.4f  dev acc %.2f"
          % (row.epoch, row.train_loss, row.dev_loss, row.dev_accuracy))

report = evaluate(best, test_set)
baseline = evaluate(
    base_model(n_channels=80, hidden_size=24, class_set=test_set.class_set, seed=42),
    test_set)
print("trained:  accuracy %.4f  macro F1 %.4f" % (report.accuracy, report.f1_macro))
print("baseline: accuracy %.4f  macro F1 %.4f" % (baseline.accuracy, baseline.f1_macro))
print("confusion (rows = true):")
for label, row in zip(report.class_set, report.confusion):
    print("  %-8s %s" % (label, row.tolist()))

save_checkpoint(best, out / "best.sckp")
print("checkpoint: %s" % (out / "best.sckp"))
