use gswin::analysis::{count_flops, count_params, enumerate_params, export_weight_maps, read_weight_csv, weight_map_grid, ShiftStrategy};
use gswin::model::{micro_config, preset, presets, Gswin, ModelConfig};
use gswin::sgu::SguInit;
use gswin::train::{train, SyntheticTask, TaskConfig, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PF: ShiftStrategy = ShiftStrategy::PaddingFree;
const ZP: ShiftStrategy = ShiftStrategy::ZeroPadding;

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value / target - 1.0).abs() <= tol
}

#[test]
fn preset_sizes_within_five_percent_of_targets() {
    for (name, millions) in [("gswin-vt", 16.0), ("gswin-t", 22.0), ("gswin-s", 40.0)] {
        let r = count_params(&preset(name).unwrap()).unwrap();
        assert!(within(r.total_params as f64 / 1e6, millions, 0.05), "{name}: {}", r.total_params);
    }
}

#[test]
fn preset_closed_form_equals_enumeration() {
    for p in presets() {
        let model = Gswin::new(&p.config, 0).unwrap();
        assert_eq!(count_params(&p.config).unwrap().entries, enumerate_params(&model).entries, "{}", p.name);
        assert_eq!(count_params(&p.config).unwrap().total_params, model.param_count() as u64);
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let stages = rng.gen_range(1..=4);
    let patch = *[2usize, 4].choose(rng).unwrap();
    let base_channels = *[2usize, 4, 6, 8].choose(rng).unwrap();
    let expansion = *[2usize, 4, 6].choose(rng).unwrap();
    let gate0 = expansion / 2 * base_channels;
    let divisors: Vec<usize> = (1..=gate0).filter(|k| gate0.is_multiple_of(*k)).collect();
    ModelConfig {
        base_channels,
        depths: (0..stages).map(|_| rng.gen_range(1..=3)).collect(),
        heads: *divisors.choose(rng).unwrap(),
        window: rng.gen_range(1..=5),
        expansion,
        drop_path_rate: 0.0,
        num_classes: rng.gen_range(2..=7),
        image_size: patch << (stages - 1) << rng.gen_range(0..=2),
        patch_size: patch,
        relative_bias: rng.gen(),
        sgu_init: SguInit::NearIdentity,
    }
}

#[test]
fn random_configs_closed_form_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        cfg.validate().unwrap();
        let model = Gswin::new(&cfg, 1).unwrap();
        assert_eq!(count_params(&cfg).unwrap().entries, enumerate_params(&model).entries, "{cfg:?}");
    }
}

#[test]
fn doubling_heads_adds_the_predicted_scalars() {
    let base = preset("gswin-t").unwrap();
    let blocks = base.depths.iter().sum::<usize>() as u64;
    let (hw, rel) = (49u64, 13 * 13u64);
    for k in [3usize, 6, 12, 24] {
        let no_rel = base.clone().with_relative_bias(false);
        let a = count_params(&no_rel.clone().with_heads(k)).unwrap().total_params;
        let b = count_params(&no_rel.with_heads(2 * k)).unwrap().total_params;
        assert_eq!(b - a, k as u64 * hw * (hw + 1) * blocks);
        let a = count_params(&base.clone().with_heads(k)).unwrap().total_params;
        let b = count_params(&base.clone().with_heads(2 * k)).unwrap().total_params;
        assert_eq!(b - a, k as u64 * (hw * (hw + 1) + rel) * blocks);
    }
}

#[test]
fn flops_within_five_percent_of_targets() {
    let t = preset("gswin-t").unwrap();
    let g = |cfg: &ModelConfig, s| count_flops(cfg, 224, s).unwrap().total_flops as f64 / 1e9;
    assert!(within(g(&t, PF), 3.6, 0.05), "{}", g(&t, PF));
    assert!(within(g(&t, ZP), 3.8, 0.05), "{}", g(&t, ZP));
    assert!(within(g(&preset("gswin-vt").unwrap(), PF), 2.3, 0.05));
    assert!(within(g(&preset("gswin-s").unwrap(), PF), 7.0, 0.05));
}

#[test]
fn flops_do_not_depend_on_heads_or_the_bias_table() {
    let t = preset("gswin-t").unwrap();
    for s in [PF, ZP] {
        let reference = count_flops(&t, 224, s).unwrap().total_flops;
        for k in [1, 3, 6, 12, 24, 48] {
            assert_eq!(count_flops(&t.clone().with_heads(k), 224, s).unwrap().total_flops, reference);
        }
        assert_eq!(count_flops(&t.clone().with_relative_bias(false), 224, s).unwrap().total_flops, reference);
    }
}

#[test]
fn padding_free_is_cheaper_exactly_when_windows_shift() {
    for p in presets() {
        assert!(count_flops(&p.config, 224, PF).unwrap().total_flops < count_flops(&p.config, 224, ZP).unwrap().total_flops);
    }
    let mut single = preset("gswin-t").unwrap();
    single.depths = vec![1, 1, 1, 1];
    assert_eq!(
        count_flops(&single, 224, PF).unwrap().total_flops,
        count_flops(&single, 224, ZP).unwrap().total_flops
    );
}

#[test]
fn flops_grow_with_depth_and_resolution() {
    let t = preset("gswin-t").unwrap();
    let base = count_flops(&t, 224, PF).unwrap().total_flops;
    for s in 0..4 {
        let mut deeper = t.clone();
        deeper.depths[s] += 2;
        assert!(count_flops(&deeper, 224, PF).unwrap().total_flops > base);
    }
    let mut last = 0;
    for res in [32, 64, 128, 224, 256, 448] {
        let f = count_flops(&t, res, PF).unwrap().total_flops;
        assert!(f > last, "{res}");
        last = f;
    }
}

#[test]
fn weight_maps_of_an_identity_model_are_zero() {
    let mut cfg = micro_config();
    cfg.sgu_init = SguInit::Identity;
    let model = Gswin::new(&cfg, 0).unwrap();
    for (s, l) in [(0, 0), (1, 1), (2, 0)] {
        assert!(weight_map_grid(&model, s, l, 0).unwrap().iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn relative_bias_only_tiles_are_shifted_copies() {
    let mut cfg = micro_config();
    cfg.sgu_init = SguInit::Identity;
    let model = Gswin::new(&cfg, 0).unwrap();
    let blk = model.block(0, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    blk.sgu.rel_table.as_ref().unwrap().tensor().data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let grid = weight_map_grid(&model, 0, 1, 1).unwrap();
    let w = 4;
    // tile (x, y) at key (i, j) depends only on (x - i, y - j)
    for x in 0..w {
        for y in 0..w {
            for i in 0..w {
                for j in 0..w {
                    if x + 1 < w && i + 1 < w {
                        assert_eq!(grid[x * w + i][y * w + j], grid[(x + 1) * w + i + 1][y * w + j]);
                    }
                    if y + 1 < w && j + 1 < w {
                        assert_eq!(grid[x * w + i][y * w + j], grid[x * w + i][(y + 1) * w + j + 1]);
                    }
                }
            }
        }
    }
    assert!(grid.iter().flatten().any(|&v| v != grid[0][0]));
}

#[test]
fn trained_weight_maps_round_trip_exactly() {
    let cfg = micro_config();
    let mut model = Gswin::new(&cfg, 0).unwrap();
    let task = SyntheticTask::new(TaskConfig { classes: 3, train_size: 32, eval_size: 8, ..TaskConfig::default() }).unwrap();
    let tc = TrainConfig { total_steps: 5, warmup_steps: 1, batch_size: 4, lr: 1e-2, ..TrainConfig::default() };
    train(&mut model, &task, &tc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_weight_maps(&model, 2, 1, 1, dir.path()).unwrap();
    let grid = weight_map_grid(&model, 2, 1, 1).unwrap();
    assert!(grid.iter().flatten().any(|&v| v != 0.0));
    assert_eq!(read_weight_csv(&files.csv).unwrap(), grid);
    assert!(export_weight_maps(&model, 9, 0, 0, dir.path()).is_err());
}
