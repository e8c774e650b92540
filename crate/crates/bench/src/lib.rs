//! Fixtures shared by the kernel benchmarks.

use relpre::geom::ObjectInstance;
use relpre::minisim::{InteractionRecord, TaskKind};
use relpre::pipeline::{generate_interactions, generate_task_scenes, pair_grid, RunConfig, TaskGenOptions};

/// `n` interaction scenes on the desk pair grid.
pub fn interaction_batch(n: usize, seed: u64) -> Vec<InteractionRecord> {
    generate_interactions(n, seed, &pair_grid(&RunConfig::desk())).expect("interaction fixture")
}

/// Object lists of `count` unstacking scenes with `blocks` blocks each.
pub fn stacks(blocks: usize, count: usize, seed: u64) -> Vec<Vec<ObjectInstance>> {
    let opts = TaskGenOptions { task: TaskKind::Unstack, blocks: vec![blocks], count, seed, marginal_fraction: 0.0, first_scene_id: 0 };
    generate_task_scenes(&opts).expect("stack fixture").into_iter().map(|r| r.objects).collect()
}
