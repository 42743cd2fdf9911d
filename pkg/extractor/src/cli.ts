/**
 * extract: train (or load) a backbone on a dataset's initial classes, then
 * export penultimate-layer features for every class and split in the fetril
 * binary feature format.
 *
 *   npm run extract -- --dataset data/cifar-like --initial 50 --seed 0 --out features/
 *
 * The dataset directory must contain train/<class>/ and test/<class>/ image
 * folders. The class-to-state order is either loaded from --class-order
 * (a JSON array of class ids, e.g. exported by a previous run) or derived
 * from --seed; the resolved order lands in <out>/class_order.json so the
 * incremental engine can pin its schedule to it.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { extractAll } from './extract'
import { listSplit } from './images'
import { loadModel, saveModel } from './modelio'
import { RESNET18_WIDTHS, buildBackbone, featureView } from './resnet'
import { mulberry32, shuffled } from './rng'
import { DEFAULT_SCHEDULE, trainBackbone } from './train'

export interface ExtractJobArgs {
  dataset: string
  out: string
  initial: number
  seed: number
  epochs: number
  batchSize: number
  lr: number
  lrStep: number
  imageSize: number
  arch: string
  augment: boolean
  pretrained?: string
  classOrder?: string
  backend: string
}

export async function runExtractJob(args: ExtractJobArgs): Promise<void> {
  if (args.backend === 'wasm') {
    require('@tensorflow/tfjs-backend-wasm')
    await tf.setBackend('wasm')
  } else {
    await tf.setBackend('cpu')
  }
  await tf.ready()

  const trainFolders = listSplit(args.dataset, 'train')
  const allIds = trainFolders.map((f) => f.classId)

  let order: number[]
  if (args.classOrder) {
    order = JSON.parse(fs.readFileSync(args.classOrder, 'utf8'))
    const sorted = [...order].sort((a, b) => a - b)
    if (JSON.stringify(sorted) !== JSON.stringify(allIds)) {
      throw new Error('--class-order must be a permutation of the dataset class ids')
    }
  } else {
    order = shuffled(allIds, mulberry32(args.seed >>> 0))
  }
  if (args.initial < 1 || args.initial > order.length) {
    throw new Error(`--initial must be in 1..${order.length}`)
  }
  const initialIds = new Set(order.slice(0, args.initial))

  fs.mkdirSync(args.out, { recursive: true })
  const widths = args.arch === 'tiny' ? [8, 16, 32, 64] : RESNET18_WIDTHS

  let model: tf.LayersModel
  if (args.pretrained) {
    model = await loadModel(args.pretrained)
    console.log(`loaded pretrained backbone from ${args.pretrained}`)
  } else {
    const backbone = buildBackbone({
      imageSize: args.imageSize,
      numClasses: args.initial,
      widths,
    })
    model = backbone.model
    const initialFolders = trainFolders.filter((f) => initialIds.has(f.classId))
    console.log(`training on ${initialFolders.length} initial classes `
      + `(${args.epochs} epochs, batch ${args.batchSize}, lr ${args.lr})`)
    const result = await trainBackbone(model, initialFolders, args.imageSize, {
      epochs: args.epochs,
      batchSize: args.batchSize,
      initialLr: args.lr,
      lrDecay: 0.1,
      lrStepEpochs: args.lrStep,
      augment: args.augment,
    }, args.seed)
    const last = result.epochLosses[result.epochLosses.length - 1]
    console.log(`final training loss ${last.toFixed(4)}`)
    await saveModel(model, path.join(args.out, 'backbone'))
  }

  const features = featureView(model)
  const manifests = await extractAll(features, {
    datasetDir: args.dataset,
    outDir: args.out,
    imageSize: args.imageSize,
    datasetName: path.basename(args.dataset),
  })

  fs.writeFileSync(path.join(args.out, 'class_order.json'), JSON.stringify({
    seed: args.seed,
    class_order: order,
    initial_classes: order.slice(0, args.initial),
    class_names: Object.fromEntries(trainFolders.map((f) => [f.classId, f.name])),
  }, null, 2) + '\n')

  console.log(`wrote ${manifests.join(', ')}`)
  console.log(`feature dim ${features.outputs[0].shape[1]}; validate with: `
    + `fetril extract-check --manifest ${manifests[0]}`)
}

export function buildCli() {
  return yargs()
    .command('extract', 'train on initial classes and export features',
      (y) => y
        .option('dataset', { type: 'string', demandOption: true,
                             describe: 'image-folder dataset root (train/, test/)' })
        .option('out', { type: 'string', demandOption: true })
        .option('initial', { type: 'number', demandOption: true,
                             describe: 'number of initial-state classes' })
        .option('seed', { type: 'number', default: 0 })
        .option('epochs', { type: 'number', default: DEFAULT_SCHEDULE.epochs })
        .option('batch-size', { type: 'number', default: DEFAULT_SCHEDULE.batchSize })
        .option('lr', { type: 'number', default: DEFAULT_SCHEDULE.initialLr })
        .option('lr-step', { type: 'number', default: DEFAULT_SCHEDULE.lrStepEpochs })
        .option('image-size', { type: 'number', default: 32 })
        .option('arch', { choices: ['resnet18', 'tiny'], default: 'resnet18',
                          describe: 'tiny = narrow test architecture' })
        .option('augment', { type: 'boolean', default: true })
        .option('pretrained', { type: 'string',
                                describe: 'load a saved backbone instead of training' })
        .option('class-order', { type: 'string',
                                 describe: 'JSON array pinning the class order' })
        .option('backend', { choices: ['cpu', 'wasm'], default: 'cpu' }),
      async (argv) => {
        await runExtractJob({
          dataset: argv.dataset,
          out: argv.out,
          initial: argv.initial,
          seed: argv.seed,
          epochs: argv.epochs,
          batchSize: argv['batch-size'],
          lr: argv.lr,
          lrStep: argv['lr-step'],
          imageSize: argv['image-size'],
          arch: argv.arch,
          augment: argv.augment,
          pretrained: argv.pretrained,
          classOrder: argv['class-order'],
          backend: argv.backend,
        })
      })
    .demandCommand(1)
    .strict()
    .help()
}

if (require.main === module) {
  buildCli().parseAsync(hideBin(process.argv)).catch((err) => {
    console.error(`error: ${err.message}`)
    process.exit(1)
  })
}
