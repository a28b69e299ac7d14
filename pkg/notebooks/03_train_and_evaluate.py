"""
Train, score, evaluate
======================

A small countermeasure on the synthetic corpus, then EER, min t-DCF and
score fusion of two back ends.
"""

# %%
from spoofcm.backend_models import POOL_ATTENTION, POOL_MEAN, BackendConfig
from spoofcm.frontend import FrontendConfig
from spoofcm.losses import preset
from spoofcm.metrics import evaluate, fuse_scores
from spoofcm.training import (TrainRunConfig, extract_corpus, generate_synthetic_dataset,
                              score_trials, split_corpus, train_model)

corpus = generate_synthetic_dataset(seed=1, n_per_class=60, duration_range=(1.0, 2.0))
train, test = split_corpus(corpus, 20)
fe = FrontendConfig()
f_train, f_test = extract_corpus(train, fe), extract_corpus(test, fe)
print(len(train), "training trials,", len(test), "test trials")

# %%
run = TrainRunConfig(seed=1, epochs=4)
systems = {}
for strategy, loss in ((POOL_MEAN, "p2sgrad"), (POOL_ATTENTION, "sigmoid")):
    backend = BackendConfig(strategy=strategy)
    result = train_model(train, fe, backend, preset(loss), run, features=f_train)
    print(strategy, loss, "final mean loss %.4f" % result.log[-1][2])
    systems[strategy] = score_trials(test, result.params, fe, backend, preset(loss),
                                     features=f_test)

# %%
# The sigmoid head scores are probabilities, the cosine head scores are
# cosines; fusion just averages them per trial.
for name, records in systems.items():
    report = evaluate(records)
    print(f"{name:15s} EER {100 * report.eer:5.2f} %  min tDCF {report.min_tdcf:.4f}")
fused = evaluate(fuse_scores(systems.values()))
print(f"{'fused':15s} EER {100 * fused.eer:5.2f} %  min tDCF {fused.min_tdcf:.4f}")
