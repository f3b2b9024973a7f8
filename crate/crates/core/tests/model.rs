use gswin::model::{micro_config, preset, tiny_config, Gswin};
use gswin::sgu::SguInit;
use gswin::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn images(b: usize, size: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[b, size, size, 3], |_| rng.gen_range(-1.0..1.0))
}

#[test]
fn gswin_t_logits_and_pyramid_at_224() {
    let cfg = preset("gswin-t").unwrap();
    let model = Gswin::new(&cfg, 0).unwrap();
    let x = images(1, 224, 1);
    let pyramid = model.extract_pyramid(&x).unwrap();
    let shapes: Vec<Vec<usize>> = pyramid.iter().map(|t| t.shape().to_vec()).collect();
    assert_eq!(shapes, vec![vec![1, 56, 56, 64], vec![1, 28, 28, 128], vec![1, 14, 14, 256], vec![1, 7, 7, 512]]);
    assert_eq!(model.logits(&x).unwrap().shape(), &[1, 1000]);
}

#[test]
fn batch_items_are_independent() {
    let model = Gswin::new(&tiny_config(), 2).unwrap();
    let x = images(3, 32, 3);
    let y = model.logits(&x).unwrap().to_vec();
    let per = x.numel() / 3;
    let data = x.to_vec();
    let permuted: Vec<f64> = [2, 0, 1].iter().flat_map(|&i| data[i * per..(i + 1) * per].to_vec()).collect();
    let yp = model.logits(&Tensor::new(&[3, 32, 32, 3], permuted).unwrap()).unwrap().to_vec();
    for (row, &src) in [2, 0, 1].iter().enumerate() {
        assert_eq!(&yp[row * 10..(row + 1) * 10], &y[src * 10..(src + 1) * 10]);
    }
}

#[test]
fn identical_images_give_identical_pyramids() {
    let model = Gswin::new(&micro_config(), 4).unwrap();
    let one = images(1, 32, 5).to_vec();
    let two = Tensor::new(&[2, 32, 32, 3], [one.clone(), one].concat()).unwrap();
    for level in model.extract_pyramid(&two).unwrap() {
        let v = level.to_vec();
        let half = v.len() / 2;
        assert_eq!(&v[..half], &v[half..]);
    }
}

#[test]
fn early_stages_ignore_later_parameters() {
    let model = Gswin::new(&tiny_config(), 6).unwrap();
    let x = images(2, 32, 7);
    let before = model.extract_pyramid(&x).unwrap();
    for p in model.stages[2].blocks[0].parameters() {
        p.tensor().data_mut().iter_mut().for_each(|v| *v += 0.3);
    }
    let after = model.extract_pyramid(&x).unwrap();
    assert_eq!(before[0].to_vec(), after[0].to_vec());
    assert_eq!(before[1].to_vec(), after[1].to_vec());
    assert_ne!(before[2].to_vec(), after[2].to_vec());
}

#[test]
fn zeroed_branches_leave_only_the_head() {
    let mut cfg = micro_config();
    cfg.sgu_init = SguInit::Identity;
    let model = Gswin::new(&cfg, 8).unwrap();
    for stage in &model.stages {
        for blk in &stage.blocks {
            blk.proj_out.weight.tensor().data_mut().iter_mut().for_each(|v| *v = 0.0);
            blk.proj_out.bias.as_ref().unwrap().tensor().data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let x = images(2, 32, 9);
    let y = model.logits(&x).unwrap();
    // scrambling every block's other weights changes nothing
    for stage in &model.stages {
        for blk in &stage.blocks {
            for p in blk.norm.parameters().into_iter().chain(blk.proj_in.parameters()).chain(blk.sgu.parameters()) {
                p.tensor().data_mut().iter_mut().for_each(|v| *v = -*v + 0.7);
            }
        }
    }
    assert_eq!(model.logits(&x).unwrap().to_vec(), y.to_vec());
    // but the head does
    model.head.weight.tensor().data_mut()[0] += 1.0;
    assert_ne!(model.logits(&x).unwrap().to_vec(), y.to_vec());
}

#[test]
fn eval_is_deterministic_and_matches_zero_drop_training_path() {
    let mut model = Gswin::new(&tiny_config(), 10).unwrap();
    let x = images(2, 32, 11);
    let a = model.logits(&x).unwrap().to_vec();
    assert_eq!(a, model.logits(&x).unwrap().to_vec());
    let b = Gswin::new(&tiny_config(), 10).unwrap().logits(&x).unwrap().to_vec();
    assert_eq!(a, b);
    model.set_drop_path_rate(0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(model.forward(&x, Some(&mut rng)).unwrap().to_vec(), a);
}

#[test]
fn drop_path_only_acts_with_an_rng() {
    let mut model = Gswin::new(&tiny_config(), 12).unwrap();
    model.set_drop_path_rate(0.9).unwrap();
    let x = images(4, 32, 13);
    let eval = model.logits(&x).unwrap().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_ne!(model.forward(&x, Some(&mut rng)).unwrap().to_vec(), eval);
    let rates: Vec<f64> = model.stages.iter().flat_map(|s| s.blocks.iter().map(|b| b.spec.drop_prob)).collect();
    assert_eq!(rates[0], 0.0);
    assert!((rates[rates.len() - 1] - 0.9).abs() < 1e-15);
    assert!(rates.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn blocks_alternate_unshifted_and_shifted() {
    let model = Gswin::new(&preset("gswin-vt").unwrap(), 0).unwrap();
    for stage in &model.stages {
        for (i, blk) in stage.blocks.iter().enumerate() {
            assert_eq!(blk.spec.shifted, i % 2 == 1);
            assert_eq!(blk.spec.window, 7);
        }
    }
}
