use std::f64::consts::PI;

use proptest::prelude::*;

use vgbench::augment::{apply, augment_pair, mix_batch, AugKind, AugPipeline, AugSeed};
use vgbench::envcore::{advance, reset, DomainId, EnvConfig, PhysState};
use vgbench::visualgen::{
    sample_visual_spec, Appearance, Factor, FactorToggles, Frame, PixelObservation, Texture, BACKGROUND_SCALE_RANGE,
    BRIGHTNESS_RANGE, CAMERA_ROTATION_RANGE, CAMERA_SHIFT_RANGE, CAMERA_ZOOM_RANGE, FLOOR_SCALE_RANGE, MAX_OCTAVES,
    REFLECTANCE_RANGE, SHADING_RANGE,
};

fn domain() -> impl Strategy<Value = DomainId> {
    prop_oneof![Just(DomainId::Cartpole), Just(DomainId::Reacher)]
}

fn toggles() -> impl Strategy<Value = FactorToggles> {
    (0u32..128).prop_map(|bits| {
        let mut t = FactorToggles::none();
        for (i, f) in Factor::ALL.iter().enumerate() {
            t.set(*f, bits & (1 << i) != 0);
        }
        t
    })
}

fn factor() -> impl Strategy<Value = Factor> {
    (0usize..7).prop_map(|i| Factor::ALL[i])
}

fn kind() -> impl Strategy<Value = AugKind> {
    (0usize..13).prop_map(|i| AugKind::ALL[i])
}

fn stack(side: usize) -> impl Strategy<Value = PixelObservation> {
    proptest::collection::vec(any::<u8>(), side * side * 9).prop_map(move |data| {
        let per = side * side * 3;
        let frames = [0, 1, 2].map(|k| Frame::from_raw(side, side, data[k * per..(k + 1) * per].to_vec()).unwrap());
        PixelObservation::from_frames(frames).unwrap()
    })
}

/// A reachable state: a reset followed by a few random steps.
fn state_and_env() -> impl Strategy<Value = (EnvConfig, PhysState)> {
    (domain(), any::<u64>(), 0u64..50, proptest::collection::vec(-1.5f64..1.5, 0..40)).prop_map(|(d, seed, idx, acts)| {
        let env = EnvConfig::new(d, seed);
        let mut s = reset(&env, idx);
        for pair in acts.chunks(2) {
            let a: Vec<f64> = (0..d.action_dim()).map(|i| pair[i % pair.len()]).collect();
            s = advance(&env, &s, &a).unwrap().state;
        }
        (env, s)
    })
}

fn action(d: DomainId) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, d.action_dim())
}

fn in_range(v: f64, r: (f64, f64)) -> bool {
    v >= r.0 && v <= r.1
}

fn texture_ok(t: &Texture, scale: (f64, f64)) -> bool {
    in_range(t.params.scale, scale)
        && (1..=MAX_OCTAVES).contains(&t.params.octaves)
        && t.colors.iter().flatten().all(|c| in_range(*c, (0.0, 1.0)))
}

fn factor_values(a: &Appearance, f: Factor) -> String {
    match f {
        Factor::Floor => format!("{:?}", a.floor),
        Factor::Background => format!("{:?}", a.background),
        Factor::BodyColor => format!("{:?}", a.body_color),
        Factor::TargetColor => format!("{:?}", a.target_color),
        Factor::Camera => format!("{:?}", a.camera),
        Factor::Light => format!("{:?}", a.lighting),
        Factor::Reflectance => format!("{:?}", a.reflectance),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transitions_are_deterministic_and_bounded((env, s) in state_and_env(), salt in any::<u64>()) {
        let a: Vec<f64> = (0..env.domain.action_dim()).map(|i| ((salt >> (8 * i)) as u8 as f64 / 127.5) - 1.0).collect();
        let x = advance(&env, &s, &a).unwrap();
        let y = advance(&env, &s, &a).unwrap();
        prop_assert!(x.state.bit_eq(&y.state));
        prop_assert_eq!(x.reward.to_bits(), y.reward.to_bits());
        prop_assert!(x.reward >= 0.0 && x.reward <= env.frame_skip as f64);
        prop_assert!(x.state.is_finite());
    }

    #[test]
    fn dynamics_seed_only_affects_resets((env, s) in state_and_env(), other in any::<u64>(), a in action(DomainId::Reacher)) {
        let a = a[..env.domain.action_dim()].to_vec();
        let moved = EnvConfig { dynamics_seed: other, ..env.clone() };
        prop_assert!(advance(&env, &s, &a).unwrap().state.bit_eq(&advance(&moved, &s, &a).unwrap().state));
    }

    #[test]
    fn angles_stay_wrapped((env, s) in state_and_env()) {
        let ok = match s {
            PhysState::Cartpole(c) => c.theta > -PI && c.theta <= PI,
            PhysState::Reacher(r) => [r.theta1, r.theta2].iter().all(|t| *t > -PI && *t <= PI),
        };
        prop_assert!(ok, "{:?} under {:?}", s, env.domain);
    }

    #[test]
    fn seed_zero_is_canonical(d in domain(), t in toggles()) {
        prop_assert_eq!(sample_visual_spec(0, t, d).appearance, Appearance::canonical(d));
    }

    #[test]
    fn factors_are_orthogonal(d in domain(), k in 1u64.., a in factor(), b in factor()) {
        let alone = sample_visual_spec(k, FactorToggles::only(a), d);
        let both = sample_visual_spec(k, FactorToggles::only(a).with(b, true), d);
        prop_assert_eq!(factor_values(&alone.appearance, a), factor_values(&both.appearance, a));
    }

    #[test]
    fn sampled_factors_respect_their_ranges(d in domain(), k in any::<u64>()) {
        let a = sample_visual_spec(k, FactorToggles::all(), d).appearance;
        prop_assert!(texture_ok(&a.floor, FLOOR_SCALE_RANGE) || k == 0);
        prop_assert!(texture_ok(&a.background, BACKGROUND_SCALE_RANGE) || k == 0);
        prop_assert!(a.body_color.iter().chain(&a.target_color).all(|c| in_range(*c, (0.0, 1.0))));
        prop_assert!(a.camera.translate.iter().all(|t| in_range(*t, CAMERA_SHIFT_RANGE)));
        prop_assert!(in_range(a.camera.rotation, CAMERA_ROTATION_RANGE));
        prop_assert!(in_range(a.camera.zoom, CAMERA_ZOOM_RANGE));
        prop_assert!(in_range(a.lighting.brightness, BRIGHTNESS_RANGE));
        prop_assert!(in_range(a.lighting.shading, SHADING_RANGE));
        prop_assert!(in_range(a.reflectance, REFLECTANCE_RANGE));
    }

    #[test]
    fn augmentations_keep_shape_and_repeat(k in kind(), s in stack(12), seed in any::<(u64, u64, u64)>()) {
        let key = AugSeed::new(seed.0, seed.1, seed.2, 0);
        let out = apply(k, &s, key).unwrap();
        prop_assert_eq!(&out, &apply(k, &s, key).unwrap());
        let side = if k == AugKind::RadCrop { 10 } else { 12 };
        prop_assert_eq!((out.width(), out.height()), (side, side));
    }

    #[test]
    fn identical_pair_stays_identical(ks in proptest::collection::vec(kind().prop_filter("one crop", |k| *k != AugKind::RadCrop), 1..4),
                                      s in stack(10), seed in any::<u64>()) {
        let (a, b) = augment_pair(&s, &s, &AugPipeline::new(ks), AugSeed::new(seed, 1, 2, 0)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn repeated_stack_frames_stay_repeated(k in kind(), f in stack(9), seed in any::<u64>()) {
        let same = PixelObservation::from_first(f.last().clone());
        let out = apply(k, &same, AugSeed::new(seed, 0, 0, 0)).unwrap();
        prop_assert!(out.frames().iter().all(|x| x == out.last()));
    }

    #[test]
    fn mix_takes_round_beta_b(beta in 0.0f64..=1.0, b in 0usize..300, seed in any::<u64>()) {
        let clean = vec![0u8; b];
        let aug = vec![1u8; b];
        let mixed = mix_batch(&clean, &aug, beta, AugSeed::new(seed, 0, 0, 0)).unwrap();
        prop_assert_eq!(mixed.len(), b);
        prop_assert_eq!(mixed.iter().filter(|v| **v == 1).count(), (beta * b as f64).round() as usize);
    }
}
