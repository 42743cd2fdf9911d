/**
 * ResNet-18 (basic blocks, 2 per stage) built with the tfjs layers API.
 *
 * The penultimate output is the global-average-pooled feature vector whose
 * dimensionality equals the last stage width (512 for the standard
 * architecture). Small inputs use a 3x3 stem without pooling; inputs of
 * 64px and above use the 7x7/2 stem plus max-pooling.
 */

import * as tf from '@tensorflow/tfjs'

export interface BackboneSpec {
  imageSize: number
  numClasses: number
  /** stage widths; [64, 128, 256, 512] is ResNet-18 */
  widths?: number[]
  blocksPerStage?: number
}

export interface Backbone {
  /** full model: image -> logits (used for training) */
  model: tf.LayersModel
  /** frozen-use model: image -> penultimate features */
  featureModel: tf.LayersModel
  featureDim: number
  spec: Required<BackboneSpec>
}

export const RESNET18_WIDTHS = [64, 128, 256, 512]
export const FEATURES_LAYER = 'features'

function basicBlock(x: tf.SymbolicTensor, filters: number, stride: number,
                    name: string): tf.SymbolicTensor {
  let out = tf.layers.conv2d({
    filters, kernelSize: 3, strides: stride, padding: 'same', useBias: false,
    name: `${name}_conv1`,
  }).apply(x) as tf.SymbolicTensor
  out = tf.layers.batchNormalization({ name: `${name}_bn1` }).apply(out) as tf.SymbolicTensor
  out = tf.layers.reLU({ name: `${name}_relu1` }).apply(out) as tf.SymbolicTensor
  out = tf.layers.conv2d({
    filters, kernelSize: 3, strides: 1, padding: 'same', useBias: false,
    name: `${name}_conv2`,
  }).apply(out) as tf.SymbolicTensor
  out = tf.layers.batchNormalization({ name: `${name}_bn2` }).apply(out) as tf.SymbolicTensor

  let shortcut = x
  if (stride !== 1 || (x.shape[3] as number) !== filters) {
    shortcut = tf.layers.conv2d({
      filters, kernelSize: 1, strides: stride, useBias: false,
      name: `${name}_proj`,
    }).apply(x) as tf.SymbolicTensor
    shortcut = tf.layers.batchNormalization({ name: `${name}_proj_bn` })
      .apply(shortcut) as tf.SymbolicTensor
  }
  out = tf.layers.add({ name: `${name}_add` }).apply([out, shortcut]) as tf.SymbolicTensor
  return tf.layers.reLU({ name: `${name}_out` }).apply(out) as tf.SymbolicTensor
}

export function buildBackbone(specIn: BackboneSpec): Backbone {
  const spec: Required<BackboneSpec> = {
    widths: RESNET18_WIDTHS,
    blocksPerStage: 2,
    ...specIn,
  }
  const input = tf.input({ shape: [spec.imageSize, spec.imageSize, 3] })
  let x: tf.SymbolicTensor
  if (spec.imageSize >= 64) {
    x = tf.layers.conv2d({
      filters: spec.widths[0], kernelSize: 7, strides: 2, padding: 'same',
      useBias: false, name: 'stem_conv',
    }).apply(input) as tf.SymbolicTensor
    x = tf.layers.batchNormalization({ name: 'stem_bn' }).apply(x) as tf.SymbolicTensor
    x = tf.layers.reLU({ name: 'stem_relu' }).apply(x) as tf.SymbolicTensor
    x = tf.layers.maxPooling2d({ poolSize: 3, strides: 2, padding: 'same', name: 'stem_pool' })
      .apply(x) as tf.SymbolicTensor
  } else {
    x = tf.layers.conv2d({
      filters: spec.widths[0], kernelSize: 3, strides: 1, padding: 'same',
      useBias: false, name: 'stem_conv',
    }).apply(input) as tf.SymbolicTensor
    x = tf.layers.batchNormalization({ name: 'stem_bn' }).apply(x) as tf.SymbolicTensor
    x = tf.layers.reLU({ name: 'stem_relu' }).apply(x) as tf.SymbolicTensor
  }

  spec.widths.forEach((filters, stage) => {
    for (let block = 0; block < spec.blocksPerStage; block++) {
      const stride = stage > 0 && block === 0 ? 2 : 1
      x = basicBlock(x, filters, stride, `stage${stage}_block${block}`)
    }
  })

  const features = tf.layers.globalAveragePooling2d({
    dataFormat: 'channelsLast', name: FEATURES_LAYER,
  }).apply(x) as tf.SymbolicTensor
  const logits = tf.layers.dense({ units: spec.numClasses, name: 'head' })
    .apply(features) as tf.SymbolicTensor

  const model = tf.model({ inputs: input, outputs: logits })
  const featureModel = tf.model({ inputs: input, outputs: features })
  return { model, featureModel, featureDim: spec.widths[spec.widths.length - 1], spec }
}

/** Rebuild the image -> features view of a loaded full model. */
export function featureView(model: tf.LayersModel): tf.LayersModel {
  const features = model.getLayer(FEATURES_LAYER).output as tf.SymbolicTensor
  return tf.model({ inputs: model.inputs, outputs: features })
}
