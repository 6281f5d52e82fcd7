"""Prepare MNIST and train IDU_10 and IDU_1 for a few epochs on a small subset.

Set IDU_MNIST_DIR to the folder with the four IDX files.
"""
import logging
import os

from idu import circuits, data, train

logging.basicConfig(level=logging.INFO, format="%(message)s")

raw = os.environ.get("IDU_MNIST_DIR", "/root/data/mnist")
split = data.prepare(raw, seed=0)  # 48000 / 12000 / 10000
print("full split", split.sizes())

small = split.subset(2400)  # 2400 / 600 / 500
print("subset", small.sizes())

config = train.TrainConfig(learning_rate=0.001, epochs=4, batch_size=32, seeds=(0,))
for circuit in (circuits.build_idu(10), circuits.build_idu(1)):
    result = train.run_experiment(circuit, small, config)
    print(train.format_summary(result))

# the same pixel permutation for every image, labels untouched
shuffled = data.shuffle_pixels(small, seed=1)
print("first image, first row before/after shuffling:")
print(small.train.angles[0, 0].round(2))
print(shuffled.train.angles[0, 0].round(2))
