"""Human-in-the-loop round trip against the labeling service, scripted.

Starts the AL loop with a HumanOracle parked on the referral queue, then
plays the expert over the HTTP API exactly as the browser console would:
poll GET /queue, POST /labels for every pending sample, watch GET /status.
Ground-truth labels stand in for the expert so the demo is self-contained.

To label by hand instead, run `mcdrop serve --synthetic ...` and open
frontend/index.html (after `npm run build` in frontend/).
"""

import threading
import time
from dataclasses import replace

from fastapi.testclient import TestClient

from mcdrop import (ALConfig, ActiveLearner, McConfig, NetworkConfig,
                    SimulatedOracle, SplitSpec, TrainConfig, split,
                    standardize)
from mcdrop.data import generate_grid_mixture
from mcdrop.server import HumanOracle, LabelQueue, StatusBoard, build_app

dataset = generate_grid_mixture(400, seed=5)
raw = split(dataset, SplitSpec(train=0.0, val=0.2, test=0.2, pool=0.6,
                               seed=5))
splits = standardize(replace(raw, train=raw.pool))

cfg = ALConfig(
    network=NetworkConfig(2, 2, [(16, "relu")], alpha=0.2, beta=0.2,
                          l2_lambda=5e-4, seed=0),
    kappa=12, tau=0.0, target_accuracy=1.0, patience=10,
    initial_labelled_fraction=0.1,
    mc=McConfig(T=15, base_seed=0),
    train=TrainConfig(learning_rate=0.05, lr_decay_every_epochs=20,
                      max_epochs=30, batch_size=16, seed=0),
    seed=0,
)

queue = LabelQueue(num_classes=2)
board = StatusBoard()
oracle = HumanOracle(queue, timeout=60.0)
truth = SimulatedOracle(splits.pool)


def on_iteration(learner):
    record = learner.state.history[-1]
    board.update(iteration=record.iteration,
                 labelled_fraction=record.labelled_fraction,
                 validation_accuracy=record.val_accuracy,
                 run_state="running")


learner = ActiveLearner(splits.pool, splits.val, cfg, oracle=oracle,
                        test_data=splits.test, on_iteration=on_iteration)
client = TestClient(build_app(queue, board))


def expert(iterations=2):
    done = 0
    while done < iterations:
        pending = client.get("/queue").json()
        if not pending:
            time.sleep(0.02)
            continue
        print(f"expert sees {len(pending)} queued samples, most uncertain "
              f"sigma={pending[0]['scalar_uncertainty']:.4f}")
        for item in pending:
            client.post("/labels", json={
                "sample_id": item["sample_id"],
                "label": truth.label(item["sample_id"]),
                "annotator_id": "demo-expert",
            })
        done += 1


thread = threading.Thread(target=expert)
thread.start()
learner.start()
print(f"initial validation accuracy: "
      f"{learner.state.history[-1].val_accuracy:.3f}")
learner.step()
learner.step()
thread.join()

status = client.get("/status").json()
print(f"after two human-labelled iterations: iteration "
      f"{status['iteration']}, labelled {status['labelled_fraction']:.2f}, "
      f"validation accuracy {status['validation_accuracy']:.3f}")
print(f"queue counts: {status['queue']}")
print(f"final state checksum: {learner.state_checksum()[:16]}…")
