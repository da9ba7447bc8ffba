import { readFileSync } from 'fs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { exportBundles } from './export.js'
import { loadPng } from './image.js'
import { buildTinyCnn, loadSavedModel } from './model.js'
import { verifyBundle } from './verify.js'

async function run() {
  await yargs(hideBin(process.argv))
    .command(
      'export',
      'export explanation bundles for an image',
      y =>
        y
          .option('image', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true })
          .option('layers', { type: 'string', describe: 'comma-separated pooling layers' })
          .option('blur', { type: 'string', describe: 'comma-separated blur sigmas, e.g. 0,1,2,4' })
          .option('gradcam', { type: 'boolean', default: false })
          .option('model', { type: 'string', describe: 'path to a tfjs model.json (default: built-in tiny CNN)' })
          .option('model-id', { type: 'string', default: 'vgg16' })
          .option('labels', { type: 'string', describe: 'labels file, one per line (required with --model)' }),
      async argv => {
        const spec = argv.model
          ? await loadSavedModel(argv.model, {
              modelId: argv['model-id'] as string,
              labels: readFileSync(argv.labels as string, 'utf8')
                .split('\n')
                .filter(l => l.length > 0),
            })
          : buildTinyCnn()
        const dirs = exportBundles(spec, {
          image: loadPng(argv.image as string),
          sourceImagePath: argv.image as string,
          outDir: argv.out as string,
          layers: argv.layers ? (argv.layers as string).split(',') : undefined,
          blurSigmas: argv.blur ? (argv.blur as string).split(',').map(Number) : undefined,
          captureGradcam: argv.gradcam as boolean,
        })
        for (const dir of dirs) console.log(`wrote bundle ${dir}`)
      },
    )
    .command(
      'verify <dir>',
      'independently re-check a bundle directory',
      y => y.positional('dir', { type: 'string', demandOption: true }),
      argv => {
        const report = verifyBundle(argv.dir as string)
        if (report.pass) {
          console.log('pass')
        } else {
          for (const f of report.failures) console.error(`fail: ${f}`)
          process.exitCode = 1
        }
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync()
}

run().catch(e => {
  console.error(`error: ${e.message ?? e}`)
  process.exit(1)
})
