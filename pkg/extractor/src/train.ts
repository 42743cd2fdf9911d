/**
 * Backbone training on the initial-state classes only.
 *
 * Default schedule: SGD, batch 128, 160 epochs, lr 0.1 decayed by 0.1 every
 * 50 epochs, cross-entropy loss, pad-and-crop plus horizontal-flip
 * augmentation. The backbone never sees images of non-initial classes and is
 * frozen once training ends.
 */

import * as tf from '@tensorflow/tfjs'
import { ClassFolder, loadClassImages } from './images'
import { Rng, mulberry32 } from './rng'

export interface TrainSchedule {
  epochs: number
  batchSize: number
  initialLr: number
  lrDecay: number
  lrStepEpochs: number
  augment: boolean
}

export const DEFAULT_SCHEDULE: TrainSchedule = {
  epochs: 160,
  batchSize: 128,
  initialLr: 0.1,
  lrDecay: 0.1,
  lrStepEpochs: 50,
  augment: true,
}

export interface TrainResult {
  epochLosses: number[]
  trainedOnClassIds: number[]
}

function augmentBatch(images: tf.Tensor4D, rng: Rng, pad = 4): tf.Tensor4D {
  return tf.tidy(() => {
    const [n, h, w] = images.shape
    const padded = images.pad([[0, 0], [pad, pad], [pad, pad], [0, 0]])
    const rows: tf.Tensor4D[] = []
    for (let i = 0; i < n; i++) {
      const dy = Math.floor(rng() * (2 * pad + 1))
      const dx = Math.floor(rng() * (2 * pad + 1))
      let img = padded.slice([i, dy, dx, 0], [1, h, w, 3]) as tf.Tensor4D
      if (rng() < 0.5) img = img.reverse(2)
      rows.push(img)
    }
    return tf.concat(rows, 0)
  })
}

/**
 * Train the classification head + backbone on the given class folders
 * (the initial classes, already filtered by the caller). Labels are indices
 * into `folders` order; only those classes exist in the head.
 */
export async function trainBackbone(
  model: tf.LayersModel,
  folders: ClassFolder[],
  imageSize: number,
  schedule: TrainSchedule,
  seed: number,
): Promise<TrainResult> {
  const perClass = folders.map((f) => loadClassImages(f.files, imageSize))
  const counts = folders.map((f) => f.files.length)
  const total = counts.reduce((a, b) => a + b, 0)

  const all = new Float32Array(total * imageSize * imageSize * 3)
  const labels = new Int32Array(total)
  let row = 0
  folders.forEach((folder, idx) => {
    all.set(perClass[idx], row * imageSize * imageSize * 3)
    labels.fill(idx, row, row + counts[idx])
    row += counts[idx]
  })

  const images = tf.tensor4d(all, [total, imageSize, imageSize, 3])
  const onehot = tf.oneHot(tf.tensor1d(labels, 'int32'), folders.length)

  const optimizer = tf.train.sgd(schedule.initialLr)
  const rng = mulberry32(seed >>> 0)
  const epochLosses: number[] = []

  for (let epoch = 0; epoch < schedule.epochs; epoch++) {
    const lr = schedule.initialLr
      * Math.pow(schedule.lrDecay, Math.floor(epoch / schedule.lrStepEpochs))
    optimizer.setLearningRate(lr)

    const order = tf.util.createShuffledIndices(total)
    let lossSum = 0
    let batches = 0
    for (let start = 0; start < total; start += schedule.batchSize) {
      const idx = Array.from(order.slice(start, start + schedule.batchSize))
      const batchX = tf.tidy(() => images.gather(idx))
      const batchY = tf.tidy(() => onehot.gather(idx))
      const input = schedule.augment ? augmentBatch(batchX as tf.Tensor4D, rng) : batchX
      const lossTensor = optimizer.minimize(() => tf.tidy(() => {
        const logits = model.apply(input, { training: true }) as tf.Tensor
        return tf.losses.softmaxCrossEntropy(batchY, logits).asScalar()
      }), true)!
      lossSum += (await lossTensor.data())[0]
      batches += 1
      lossTensor.dispose()
      if (input !== batchX) input.dispose()
      batchX.dispose()
      batchY.dispose()
    }
    epochLosses.push(lossSum / batches)
  }

  images.dispose()
  onehot.dispose()
  return { epochLosses, trainedOnClassIds: folders.map((f) => f.classId) }
}
