"""An example program that uses the scoutpy module"""

from scoutpy.scoutconfig import RunConfig, parse_config
from scoutpy.scoutagent import NoveltyExplorer, baseline_count, baseline_random
from scoutpy.scoutmetrics import heatmap_frame, export_representation, aggregate
import os

## Load configuration
if os.path.exists("config.json"):
    config = parse_config("config.json")
else:
    config = RunConfig(n_max = 500)

## Novelty search example
# Run the agent, then write the run directory to disk
explorer = NoveltyExplorer(config)
log = explorer.run("runs/novelty")
print ("novelty coverage: ", log.summary['coverage_fraction'])
print ("novelty coverage at 500 steps: ", log.summary['coverage_at_500'])

## Heatmap example
# Visit counts after the first 100 steps and at the end
heatmap = heatmap_frame(log.steps, explorer.env, at = [100, log.summary['steps']])
heatmap.to_csv("runs/novelty/heatmap.csv", index = False)

## Representation example
# Encoded states from the buffer, labelled by the side of the labyrinth
states, transitions = export_representation(
        explorer.buffer, explorer.model, "runs/novelty", env_id = config.env,
        env_shape = (explorer.env.height, explorer.env.width))
print ("encoded states: ", len(states))

## Baseline examples
count_log = baseline_count(config, "runs/count")
print ("count coverage: ", count_log.summary['coverage_fraction'])
random_log = baseline_random(config, "runs/random")
print ("random coverage: ", random_log.summary['coverage_fraction'])

## Seed sweep example
# Runs 3 seeds one after another and aggregates their summaries
print ("Run a 3-seed sweep (Y/N)?")
s = input('--> ')

if (s == "y" or s == "Y"):
    summaries = [NoveltyExplorer(config.replace(seed = seed)).run().summary
                 for seed in range(3)]
    print (aggregate(summaries, ['coverage_fraction', 'unique_visited']))
