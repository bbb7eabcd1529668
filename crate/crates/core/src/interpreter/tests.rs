use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::expert::demonstrate;
use crate::ntpmodel::{NtpModel, Variant};
use crate::taskgen::{sample_task, Family, TaskConfig};
use crate::trainer::small_config;

struct Fixed(Decision);

impl Controller for Fixed {
    fn decide(&self, _: &Query, _: &mut FrameMemory) -> Result<Decision, NtpError> {
        Ok(self.0.clone())
    }
}

fn sorting_case() -> (TaskInstance, crate::expert::Demonstration) {
    let t = TaskInstance::sorting([1, 2, 3, 0], [2, 1, 0, 1]).unwrap();
    let d = demonstrate(&t, 4).unwrap();
    (t, d)
}

#[test]
fn immediate_eop_does_nothing() {
    let (t, d) = sorting_case();
    let mut env = Environment::new(&t, 9).unwrap();
    let ctl = Fixed(Decision { eop: 0.9, next: Program::Grip, scope: (0, 0), arg: None });
    let r = run(&t, Program::ObjectSorting, &d.spec, &mut env, &ctl, &RuntimeConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::Completed);
    assert!(r.api_log.is_empty() && r.call_tree.children.is_empty() && !r.success);
}

#[test]
fn oracle_replays_expert_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for family in Family::ALL {
        for seed in 0..15 {
            let t = sample_task(family, &TaskConfig::default(), &mut rng);
            let d = demonstrate(&t, seed).unwrap();
            let mut env = Environment::new(&t, seed).unwrap();
            let r = run(&t, family.root_program(), &d.spec, &mut env, &TraceOracle::new(&d.tree), &RuntimeConfig::default()).unwrap();
            assert_eq!(r.termination, Termination::Completed);
            assert_eq!(r.api_log, d.api_log);
            assert_eq!(r.call_tree, d.tree);
            assert!(r.success);
        }
    }
}

#[test]
fn caps_become_terminations() {
    let (t, d) = sorting_case();
    let cfg = RuntimeConfig { max_depth: 1, ..Default::default() };
    let recurse = Fixed(Decision { eop: 0.0, next: Program::PickAndPlace, scope: (0, 3), arg: None });
    let r = run(&t, Program::ObjectSorting, &d.spec, &mut Environment::new(&t, 0).unwrap(), &recurse, &cfg).unwrap();
    assert_eq!(r.termination, Termination::DepthExceeded);
    assert_eq!(r.call_tree.children.len(), 1);

    let grip = Fixed(Decision { eop: 0.0, next: Program::Grip, scope: (0, 0), arg: None });
    let r = run(&t, Program::Grip, &d.spec, &mut Environment::new(&t, 0).unwrap(), &grip, &RuntimeConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::IterationCapExceeded);
    assert_eq!(r.api_log.len(), 50);
    let cfg = RuntimeConfig { max_api_calls: 7, ..Default::default() };
    let r = run(&t, Program::Grip, &d.spec, &mut Environment::new(&t, 0).unwrap(), &grip, &cfg).unwrap();
    assert_eq!(r.termination, Termination::BudgetExceeded);
    assert_eq!(r.api_log.len(), 7);

    let bad = Fixed(Decision { eop: 0.0, next: Program::MoveTo, scope: (0, 0), arg: Some(43) });
    let r = run(&t, Program::Pick, &d.spec, &mut Environment::new(&t, 0).unwrap(), &bad, &RuntimeConfig::default()).unwrap();
    assert_eq!(r.termination, Termination::InvalidApiCall);
}

#[test]
fn invalid_runtime_config_is_rejected() {
    let (t, d) = sorting_case();
    let ctl = Fixed(Decision { eop: 1.0, next: Program::Grip, scope: (0, 0), arg: None });
    for cfg in [RuntimeConfig { alpha: 1.0, ..Default::default() }, RuntimeConfig { max_depth: 0, ..Default::default() }] {
        assert!(run(&t, Program::ObjectSorting, &d.spec, &mut Environment::new(&t, 0).unwrap(), &ctl, &cfg).is_err());
    }
}

#[test]
fn random_models_halt_deterministically() {
    let (t, d) = sorting_case();
    for v in Variant::ALL {
        for seed in 0..3 {
            let mut model = NtpModel::new(small_config(v, seed)).unwrap();
            // Bias against returning so that the caps are exercised.
            let id = model.store.id("core.eop.b").unwrap();
            model.store.value_mut(id).fill(-5.0);
            let go = || {
                let mut env = Environment::new(&t, 11).unwrap();
                run(&t, t.family().root_program(), &d.spec, &mut env, &ModelController { model: &model }, &RuntimeConfig::default()).unwrap()
            };
            let r = go();
            assert!(r.api_log.len() <= 500);
            assert_ne!(r.termination, Termination::Completed, "{v}");
            assert_eq!(r, go());
        }
    }
}

#[test]
fn observations_are_reread_after_perturbation() {
    let t = TaskInstance::stacking(4, vec![vec![0, 1, 2, 3]]).unwrap();
    let d = demonstrate(&t, 2).unwrap();
    let mut env = Environment::new(&t, 2).unwrap().with_adversary(1.0, 5);
    let (r, steps) = run_traced(&t, Program::BlockStacking, &d.spec, &mut env, &TraceOracle::new(&d.tree), &RuntimeConfig::default(), true).unwrap();
    assert!(r.topples > 0 && !r.success);
    let mut shadow = Environment::new(&t, 2).unwrap().with_adversary(1.0, 5);
    shadow.defer_adversary(true);
    let mut done = 0;
    let mut depth = 0;
    for s in &steps {
        // A pending topple lands when the releasing frame returns.
        if s.depth < depth {
            shadow.settle().unwrap();
        }
        depth = s.depth;
        // Replay the calls issued before this decision on an identical world.
        let issued: usize = steps.iter().take_while(|x| !std::ptr::eq(*x, s)).filter(|x| x.next_program.is_some_and(Program::is_primitive)).count();
        while done < issued {
            shadow.call(r.api_log[done]).unwrap();
            done += 1;
        }
        assert_eq!(s.obs, shadow.observe());
    }
    let mut buf = Vec::new();
    write_exec_trace(&steps, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), steps.len());
}
