use super::*;
use crate::expert::demonstrate;
use crate::features::frame_features;
use crate::numcore::{Graph, Tensor};
use crate::program::Program;
use crate::taskgen::TaskInstance;
use crate::worldsim::SlotLayout;

fn small(variant: Variant) -> NtpModel {
    let cfg = ModelConfig {
        variant,
        state_dim: 16,
        spec_dim: 16,
        key_dim: 9,
        prog_dim: 8,
        conv_channels: 8,
        core_hidden: 16,
        tsi_hidden: 8,
        ptr_hidden: 8,
        ..Default::default()
    };
    NtpModel::new(cfg).unwrap()
}

fn demo_frames() -> (Vec<Vec<f64>>, StateInput) {
    let t = TaskInstance::sorting([1, 2, 3, 0], [1, 1, 0, 0]).unwrap();
    let layout = SlotLayout::for_task(&t);
    let d = demonstrate(&t, 3).unwrap();
    let frames = d.spec.frames.iter().map(|o| frame_features(o, &layout)).collect();
    (frames, StateInput::new(&d.spec.frames[0], &layout))
}

#[test]
fn memory_lookup_matches_brute_force() {
    let keys = Tensor::matrix(3, 2, vec![1.0, 0.0, 0.0, 1.0, 0.7, 0.7]);
    assert_eq!(memory_lookup(&[1.0, 0.1], &keys), 0);
    assert_eq!(memory_lookup(&[0.1, 1.0], &keys), 1);
    assert_eq!(memory_lookup(&[1.0, 1.0], &keys), 2);
    // Equal scores resolve to the first row.
    assert_eq!(memory_lookup(&[0.0, 0.0], &keys), 0);
}

#[test]
fn select_program_uses_the_memory() {
    let mut m = small(Variant::Ntp);
    let (keys, _) = m.memory().unwrap();
    let dim = m.config.key_dim;
    // Orthonormal keys make every program reachable by its own key.
    let eye: Vec<f64> = (0..9 * dim).map(|i| f64::from(u8::from(i / dim == i % dim))).collect();
    *m.store.value_mut(keys) = Tensor::matrix(9, dim, eye);
    for p in [Program::Place, Program::Grip] {
        let mut key = vec![0.0; dim];
        key[p.id()] = 1.0;
        let out = CoreOutput { eop: 0.0, head: key, hidden: None };
        assert_eq!(m.select_program(&out), p);
    }
}

#[test]
fn eop_is_a_probability_and_reactive_core_is_stateless() {
    let (frames, _) = demo_frames();
    for v in [Variant::Ntp, Variant::NtpNoScope, Variant::Flat] {
        let m = small(v);
        let c = m.infer_spec(&frames, (0, frames.len() - 1)).unwrap();
        let s = m.infer_state(&frames[0]).unwrap();
        let rel = relation(&frames, (0, frames.len() - 1), &frames[0]);
        let a = m.infer_core(&c, Some(Program::ObjectSorting), &s, &rel, None).unwrap();
        let b = m.infer_core(&c, Some(Program::ObjectSorting), &s, &rel, None).unwrap();
        assert!((0.0..=1.0).contains(&a.eop));
        assert_eq!(a, b);
        assert!(a.hidden.is_none());
    }
}

#[test]
fn gru_core_depends_on_history() {
    let (frames, _) = demo_frames();
    let m = small(Variant::NtpGru);
    let c = m.infer_spec(&frames, (0, frames.len() - 1)).unwrap();
    let s0 = m.infer_state(&frames[0]).unwrap();
    let s1 = m.infer_state(&frames[4]).unwrap();
    let rel = relation(&frames, (0, frames.len() - 1), &frames[4]);
    let fresh = m.infer_core(&c, Some(Program::ObjectSorting), &s1, &rel, None).unwrap();
    let h = m.infer_core(&c, Some(Program::ObjectSorting), &s0, &rel, None).unwrap().hidden.unwrap();
    let after = m.infer_core(&c, Some(Program::ObjectSorting), &s1, &rel, Some(&h)).unwrap();
    assert_ne!(fresh.head, after.head);
}

#[test]
fn zero_encoder_weights_give_zero_code() {
    let (frames, _) = demo_frames();
    let mut m = small(Variant::Ntp);
    for id in m.store.ids().collect::<Vec<_>>() {
        if m.store.name(id).starts_with("enc.") {
            m.store.value_mut(id).fill(0.0);
        }
    }
    let s = m.infer_state(&frames[2]).unwrap();
    assert!(s.data().iter().all(|x| *x == 0.0));
}

#[test]
fn scope_rows_are_distributions() {
    let (frames, _) = demo_frames();
    let m = small(Variant::Ntp);
    let s = m.infer_state(&frames[0]).unwrap();
    let probs = m.infer_scope(&frames, (0, frames.len() - 1), &frames[0], Program::PickAndPlace, &s).unwrap();
    assert_eq!(probs.len(), frames.len());
    for p in probs {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(small(Variant::NtpNoScope).infer_scope(&frames, (0, 1), &frames[0], Program::Pick, &s).is_err());
}

#[test]
fn pointer_only_picks_present_slots() {
    let (frames, state) = demo_frames();
    let m = small(Variant::Flat);
    let s = m.infer_state(&frames[0]).unwrap();
    let k = m.infer_arg(&frames, (0, frames.len() - 1), &s, &state).unwrap();
    assert!(state.valid[k]);
    let mut g = Graph::new(&m.store);
    let sv = g.input(s);
    let (logits, ids) = m.arg_logits(&mut g, &frames, (0, 3), sv, &state).unwrap();
    assert_eq!(g.value(logits).len(), state.valid.iter().filter(|v| **v).count());
    assert_eq!(ids.len(), g.value(logits).len());
}

#[test]
fn bad_windows_are_rejected() {
    let (frames, _) = demo_frames();
    let m = small(Variant::Ntp);
    assert!(matches!(m.infer_spec(&frames, (3, 2)), Err(crate::NtpError::EmptySpec)));
    assert!(matches!(m.infer_spec(&[], (0, 0)), Err(crate::NtpError::EmptySpec)));
}

#[test]
fn checkpoint_round_trip_and_version_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let m = small(Variant::NtpGru);
    let h1 = save_checkpoint(&m, &path).unwrap();
    let (back, h2) = load_checkpoint(&path).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(h1.len(), 64);
    assert_eq!(Checkpoint::of(&back), Checkpoint::of(&m));
    let mut ck = Checkpoint::of(&m);
    ck.registry_version += 1;
    assert!(matches!(ck.into_model(), Err(crate::NtpError::RegistryVersion { .. })));
    let mut ck = Checkpoint::of(&m);
    ck.params.remove("core.eop.b");
    assert!(ck.into_model().is_err());
}

#[test]
fn variant_names_round_trip() {
    for v in Variant::ALL {
        assert_eq!(Variant::parse(v.name()).unwrap(), v);
    }
    assert!(Variant::parse("lstm").is_err());
    assert!(ModelConfig { conv_width: 2, ..Default::default() }.validate().is_err());
    let toml_cfg: ModelConfig = toml::from_str("variant = \"flat_gru\"\nstate_dim = 8").unwrap();
    assert_eq!(toml_cfg.variant, Variant::FlatGru);
    assert!(toml::from_str::<ModelConfig>("bogus = 1").is_err());
}
