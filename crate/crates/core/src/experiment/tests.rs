use libm::{atan2, cos, hypot, sin};
use proptest::prelude::*;

use super::*;
use crate::nn::{Activation, Mlp};
use crate::tgo::{Normalizer, PREDICTOR_LAYERS};

const G: f64 = 9.81;

fn state(x: f64, y: f64, speed: f64, gamma: f64) -> VehicleState {
    VehicleState {
        time: 0.0,
        x,
        y,
        speed,
        gamma,
    }
}

fn origin() -> Engagement {
    Engagement::default()
}

#[test]
fn closed_form_tgo() {
    let lam = -PI / 4.0;
    let aimed = state(-20_000.0 / 2f64.sqrt(), 20_000.0 / 2f64.sqrt(), 200.0, lam);
    assert!((approx_tgo_png(&aimed, &origin()).unwrap() - 100.0).abs() < 1e-9);
    let off = VehicleState {
        gamma: lam + 1.0,
        ..aimed
    };
    assert!((approx_tgo_png(&off, &origin()).unwrap() - 110.0).abs() < 1e-9);
    assert!(approx_tgo_png(&state(-1.0, 1.0, 0.0, 0.0), &origin()).is_err());
}

#[test]
fn angle_wrapping() {
    assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    assert_eq!(wrap_angle(0.3), 0.3);
}

/// Independent evaluation of both laws from raw coordinates.
fn itcg_oracle(s: &VehicleState, t_d: f64) -> (f64, f64) {
    let (dx, dy) = (-s.x, -s.y);
    let r = hypot(dx, dy);
    let lam = atan2(dy, dx);
    let mut he = s.gamma - lam;
    while he > PI {
        he -= 2.0 * PI;
    }
    while he <= -PI {
        he += 2.0 * PI;
    }
    let lam_dot = -s.speed * sin(he) / r;
    let v = s.speed;
    let tgo = (1.0 + he * he / 10.0) * r / v;
    let a1 = 3.0 * v * lam_dot
        + (-120.0 * v * v * v * v * v) / (3.0 * v * lam_dot * r * r * r) * (t_d - s.time - tgo)
        + G * cos(s.gamma);
    let a2 = -3.0 * v * v / r * he
        + 100.0 * v * v / (r * he) * (t_d - s.time - tgo) / (t_d - s.time)
        + G * cos(s.gamma);
    (a1, a2)
}

#[test]
fn analytic_laws_match_oracle() {
    let cases = [
        state(-20_000.0, 20_000.0, 200.0, 0.0),
        state(-8_000.0, 5_000.0, 320.0, -0.9),
        VehicleState {
            time: 40.0,
            ..state(-3_000.0, 9_000.0, 400.0, -1.6)
        },
    ];
    for s in cases {
        let (a1, a2) = itcg_oracle(&s, 120.0);
        let c1 = itcg1_command(&s, &origin(), 120.0, G).unwrap();
        let c2 = itcg2_command(&s, &origin(), 120.0, G).unwrap();
        assert!((c1.total - a1).abs() <= 1e-9 * a1.abs().max(1.0));
        assert!((c2.total - a2).abs() <= 1e-9 * a2.abs().max(1.0));
        assert!(
            (c1.baseline - crate::dynamics::png_baseline(&s, &origin(), G).unwrap()).abs() < 1e-12
        );
    }
}

#[test]
fn analytic_laws_without_time_error() {
    let s = state(-8_000.0, 5_000.0, 320.0, -0.2);
    let t_d = approx_tgo_png(&s, &origin()).unwrap();
    let c1 = itcg1_command(&s, &origin(), t_d, G).unwrap();
    assert_eq!(c1.bias, 0.0);
    assert_eq!(
        c1.total,
        crate::dynamics::png_baseline(&s, &origin(), G).unwrap()
    );
    let c2 = itcg2_command(&s, &origin(), t_d, G).unwrap();
    assert_eq!(c2.bias, 0.0);
    let he = heading_error(&s, &origin()).unwrap();
    assert_eq!(
        c2.total,
        -3.0 * 320.0 * 320.0 * he / hypot(8_000.0, 5_000.0) + G * cos(-0.2)
    );
}

#[test]
fn singularity_guards() {
    let lam = atan2(5_000.0, 8_000.0);
    let aimed = state(-8_000.0, 5_000.0, 300.0, -lam);
    let c1 = itcg1_command(&aimed, &origin(), 200.0, G).unwrap();
    let c2 = itcg2_command(&aimed, &origin(), 200.0, G).unwrap();
    assert_eq!((c1.bias, c2.bias), (0.0, 0.0));
    let late = VehicleState {
        time: 119.6,
        ..state(-8_000.0, 5_000.0, 300.0, 0.0)
    };
    assert_eq!(itcg2_command(&late, &origin(), 120.0, G).unwrap().bias, 0.0);
    assert_ne!(itcg1_command(&late, &origin(), 120.0, G).unwrap().bias, 0.0);
}

fn constant_predictor(tgo: f64) -> TgoPredictor {
    let mut net = Mlp::zeros(&PREDICTOR_LAYERS, Activation::Identity).unwrap();
    let last = net.n_params() - 1;
    net.params_mut()[last] = tgo;
    TgoPredictor {
        net,
        normalizer: Normalizer::new(300.0, -0.5, -10_000.0, 15_000.0).unwrap(),
    }
}

fn zero_actor() -> GaussianPolicy {
    GaussianPolicy {
        net: Mlp::zeros(&crate::ppo::POLICY_LAYERS, Activation::Tanh).unwrap(),
        log_std: 0.0,
    }
}

#[test]
fn untrained_proposed_law_flies_png() {
    let sim = Simulator::default();
    let (actor, predictor, ppo) = (zero_actor(), constant_predictor(90.0), PpoConfig::default());
    let models = Models {
        actor: &actor,
        predictor: &predictor,
        ppo: &ppo,
    };
    let runs = run_comparison(&sim, models, 120.0).unwrap();
    assert_eq!(runs.len(), 4);
    let png = &runs[0].rollout;
    let proposed = &runs[1];
    assert_eq!(png.termination, proposed.rollout.termination);
    assert_eq!(proposed.eps_series.len(), proposed.rollout.trajectory.len());
    // ε_t = t_d − t − 90 with the constant predictor
    for (p, e) in proposed.rollout.trajectory.iter().zip(&proposed.eps_series) {
        assert!((e - (30.0 - p.state.time)).abs() < 1e-9);
    }
    let fixed = run_fixed_scenario(&sim, models, &[110.0, 130.0]).unwrap();
    assert_eq!(fixed[0].1.max_abs_bias, 0.0);
    assert!((fixed[1].1.impact_time_error - (130.0 - fixed[1].1.final_time)).abs() < 1e-12);
    assert!(matches!(
        run_law(&sim, Law::Proposed, fixed_scenario(), 120.0, None),
        Err(Error::Config(_))
    ));
}

#[test]
fn analytic_laws_fail_reference_engagement() {
    let sim = Simulator::default();
    for law in [Law::Itcg1, Law::Itcg2] {
        let run = run_law(&sim, law, fixed_scenario(), 120.0, None).unwrap();
        assert_ne!(
            run.rollout.termination.outcome,
            Outcome::Hit,
            "{}",
            law.as_str()
        );
    }
}

#[test]
fn monte_carlo_bookkeeping() {
    let env = EngagementConfig::default();
    let (actor, predictor, ppo) = (zero_actor(), constant_predictor(90.0), PpoConfig::default());
    let models = Models {
        actor: &actor,
        predictor: &predictor,
        ppo: &ppo,
    };
    let report = run_monte_carlo(&env, models, 6, 17).unwrap();
    assert_eq!(report, run_monte_carlo(&env, models, 6, 17).unwrap());
    assert_eq!(report.stats, MonteCarloStats::from_runs(&report.runs));
    assert_eq!(report.histogram.counts.iter().sum::<usize>(), 6);
    for r in &report.runs {
        assert!(r.t_d >= 99.0 - 1e-9 && r.t_d <= 108.0 + 1e-9);
        assert_eq!(r.impact_time_error, r.t_d - r.final_time);
        assert!(!r.normalized_error.is_empty());
    }
    let single = run_monte_carlo(&env, models, 1, 17).unwrap();
    let e = single.runs[0].impact_time_error;
    assert_eq!(single.stats.mean_error, e);
    assert_eq!(single.stats.std_error, 0.0);
    assert_eq!(single.stats.max_abs_error, e.abs());
    assert_eq!(single.runs[0], report.runs[0]);
    assert!(run_monte_carlo(&env, models, 0, 17).is_err());
}

#[test]
fn histogram_bins() {
    let h = Histogram::new(&[-0.7, -0.2, 0.0, 0.1, 0.49, 1.6], 0.5);
    assert_eq!(h.start, -1.0);
    assert_eq!(h.counts, vec![1, 1, 3, 0, 0, 1]);
    assert!(Histogram::new(&[], 0.5).counts.is_empty());
}

proptest! {
    #[test]
    fn closed_form_tgo_bounded_below(
        x in -25_000.0f64..-100.0,
        y in 100.0f64..35_000.0,
        v in 150.0f64..450.0,
        gamma in -3.0f64..3.0,
    ) {
        let s = state(x, y, v, gamma);
        prop_assert!(approx_tgo_png(&s, &origin()).unwrap() >= hypot(x, y) / v);
    }
}

#[test]
fn selection_keeps_best_checkpoint() {
    let env = EngagementConfig::default();
    let predictor = constant_predictor(90.0);
    let cfg = PpoConfig {
        max_episodes: 3,
        t_max_steps: 60,
        ..Default::default()
    };
    let selection = SelectionConfig {
        interval: 2,
        runs: 2,
        ..Default::default()
    };
    let picked = train_selected(&env, &predictor, &cfg, &selection, &[5, 6]).unwrap();
    assert_eq!(picked.candidates.len(), 2);
    for c in &picked.candidates {
        let episodes: Vec<usize> = c.scores.iter().map(|s| s.0).collect();
        assert_eq!(episodes, vec![1, 2]);
        assert!(c.scores.iter().all(|s| s.1 >= picked.best.score));
    }
    let winner = &picked
        .candidates
        .iter()
        .find(|c| c.seed == picked.best.seed)
        .unwrap();
    assert!(winner
        .scores
        .contains(&(picked.best.episode, picked.best.score)));
    let models = Models {
        actor: &picked.best.actor,
        predictor: &predictor,
        ppo: &cfg,
    };
    assert_eq!(
        validation_score(&env, models, &selection).unwrap(),
        picked.best.score
    );

    let untrained = PpoConfig {
        max_episodes: 0,
        ..cfg
    };
    let zero = train_selected(&env, &predictor, &untrained, &selection, &[5]).unwrap();
    assert_eq!(
        zero.best.actor,
        crate::ppo::PpoAgent::new(&untrained, 5).unwrap().actor
    );
    assert!(train_selected(&env, &predictor, &cfg, &selection, &[]).is_err());
}
