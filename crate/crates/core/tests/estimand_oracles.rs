use interference::battery::{battery_instance, BatteryOptions, InstanceKind};
use interference::estimands::*;
use interference::model::OutcomeModel;
use interference::zoo::*;
use interference::{BernoulliDesign, Design, InterferenceGraph, ProbabilityVector, TwoStageClusteredDesign};
use proptest::prelude::*;

fn bern(n: usize, p: f64) -> Design {
    BernoulliDesign::constant(n, p).unwrap().into()
}

fn binom_pmf(d: usize, p: f64, b: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..b {
        c = c * (d - k) as f64 / (k + 1) as f64;
    }
    c * p.powi(b as i32) * (1.0 - p).powi((d - b) as i32)
}

fn pairs(n: usize) -> InterferenceGraph {
    InterferenceGraph::new((0..n).map(|i| vec![i ^ 1]).collect()).unwrap()
}

fn example1(graph: InterferenceGraph) -> LinearInMeans {
    make_linear_in_means(LinearInMeansSpec {
        graph,
        beta1: 1.0,
        beta2: 0.7,
        beta3: 0.3,
    })
    .unwrap()
}

#[test]
fn four_type_under_bernoulli_conditions_on_exposure() {
    let outcomes = vec![
        ExposureOutcomes { treated_exposed: 3.0, treated: 2.0, exposed: 1.0, none: 0.0 },
        ExposureOutcomes { treated_exposed: 1.5, treated: 0.5, exposed: 2.5, none: 1.0 },
        ExposureOutcomes { treated_exposed: -1.0, treated: 4.0, exposed: 0.0, none: 2.0 },
        ExposureOutcomes { treated_exposed: 2.0, treated: 2.0, exposed: 2.0, none: 1.0 },
    ];
    let model = make_four_type_exposure(FourTypeExposureSpec {
        cluster_size: 2,
        clusters: None,
        outcomes: outcomes.clone(),
    })
    .unwrap();
    let pi: f64 = 0.3;
    let p_exp = 1.0 - (1.0f64 - pi).powi(2 - 1);
    let expected = outcomes
        .iter()
        .map(|o| p_exp * (o.treated_exposed - o.exposed) + (1.0 - p_exp) * (o.treated - o.none))
        .sum::<f64>()
        / 4.0;
    assert!((ade_exact(&model, &bern(4, pi)).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn example1_is_design_free_for_direct_effect() {
    let model = example1(InterferenceGraph::complete(4));
    let d: Design = TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into();
    assert!((ade_exact(&model, &d).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn design_freeness_of_linear_models() {
    let lim = example1(InterferenceGraph::circulant(8, 1).unwrap());
    let sat = make_saturated_linear(SaturatedLinearSpec {
        alpha: vec![0.3, -0.2, 0.0, 1.0, 0.5, 0.1, -0.4, 0.2],
        beta: vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.5, 0.25, -0.5],
        nu: (0..8)
            .map(|i| (0..8).map(|j| if i == j { 0.0 } else { ((i * 3 + j * 5) % 7) as f64 / 10.0 - 0.3 }).collect())
            .collect(),
    })
    .unwrap();
    let designs: Vec<Design> = vec![
        bern(8, 0.3),
        bern(8, 0.7),
        TwoStageClusteredDesign::new(8, 2, 0.5).unwrap().into(),
        TwoStageClusteredDesign::new(8, 4, 0.5).unwrap().into(),
    ];
    for model in [&lim as &dyn OutcomeModel, &sat] {
        let (a0, i0) = estimands_exact(model, &designs[0]).unwrap();
        for d in &designs[1..] {
            let (a, i) = estimands_exact(model, d).unwrap();
            assert!((a - a0).abs() < 1e-10 && (i - i0).abs() < 1e-10, "{}", d.describe());
        }
    }
}

#[test]
fn setting2_degree4_binomial_sum() {
    let model = make_fig1_setting(Fig1SettingSpec {
        setting: 2,
        graph: InterferenceGraph::circulant(6, 2).unwrap(),
    })
    .unwrap();
    // treated minus untreated is (1 − B/4)²/2
    let expected: f64 = (0..=4).map(|b| binom_pmf(4, 0.5, b) * (1.0 - b as f64 / 4.0).powi(2) / 2.0).sum();
    let v = anonymous_binomial_values(&model, 0.5).unwrap();
    let (ade, aie) = estimands_exact(&model, &bern(6, 0.5)).unwrap();
    assert!((v.ade - expected).abs() < 1e-14);
    assert!((ade - expected).abs() < 1e-12);
    assert!((aie - v.aie).abs() < 1e-12);
}

#[test]
fn setting1_reduced_degree_matches_enumeration() {
    let model = make_fig1_setting(Fig1SettingSpec {
        setting: 1,
        graph: InterferenceGraph::circulant(6, 2).unwrap(),
    })
    .unwrap();
    for pi0 in [0.1, 0.5, 0.85] {
        let v = anonymous_binomial_values(&model, pi0).unwrap();
        let (ade, aie) = estimands_exact(&model, &bern(6, pi0)).unwrap();
        assert!((v.ade - 2.0 / 3.0).abs() < 1e-12);
        assert!((v.aie - 4.0 / 300.0).abs() < 1e-12);
        assert!((ade - v.ade).abs() < 1e-12 && (aie - v.aie).abs() < 1e-12);
    }
}

#[test]
fn setting3_on_pairs_matches_enumeration() {
    let model = make_fig1_setting(Fig1SettingSpec { setting: 3, graph: pairs(6) }).unwrap();
    let v = anonymous_binomial_values(&model, 0.5).unwrap();
    let (ade, aie) = estimands_exact(&model, &bern(6, 0.5)).unwrap();
    assert!((ade - v.ade).abs() < 1e-12);
    assert!((aie - v.aie).abs() < 1e-12);
}

#[test]
fn setting2_finite_difference_matches_overall_effect() {
    let model = make_fig1_setting(Fig1SettingSpec {
        setting: 2,
        graph: InterferenceGraph::circulant(6, 2).unwrap(),
    })
    .unwrap();
    let pi = ProbabilityVector::constant(6, 0.5).unwrap();
    let fd = inf_finite_difference(&model, &pi, 1e-4, FdMode::Exact).unwrap();
    let (ade, aie) = estimands_exact(&model, &bern(6, 0.5)).unwrap();
    assert!((fd - (ade + aie)).abs() < 1e-6);
    // the binomial route differentiates V analytically
    let v = anonymous_binomial_values(&model, 0.5).unwrap();
    assert!((v.derivative - (ade + aie)).abs() < 1e-12);
}

#[test]
fn analytic_inf_known_values() {
    let lim = example1(InterferenceGraph::circulant(6, 1).unwrap());
    assert!((inf_analytic(&lim, &bern(6, 0.4)).unwrap() - 1.0).abs() < 1e-12);
    let div = make_diverging_anonymous(DivergingAnonymousSpec { pi0: 0.5 }, 4).unwrap();
    assert!((inf_analytic(&div, &bern(4, 0.5)).unwrap() - 4.0).abs() < 1e-12);
    let two_stage: Design = TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into();
    assert!(inf_analytic(&div, &two_stage).is_err());
}

#[test]
fn indirect_contrast_between_bernoulli_trials() {
    let model = example1(InterferenceGraph::circulant(6, 1).unwrap());
    let p = ProbabilityVector::constant(6, 0.3).unwrap();
    let q = ProbabilityVector::constant(6, 0.55).unwrap();
    assert!((ie_two_bernoulli(&model, &p, &q).unwrap() - 0.3 * 0.25).abs() < 1e-12);
    assert!((ie_two_bernoulli(&model, &q, &p).unwrap() + 0.3 * 0.25).abs() < 1e-12);
    let none = NoInterference::constant(6, 1.0, 2.0);
    assert!(ie_two_bernoulli(&none, &p, &q).unwrap().abs() < 1e-12);
}

#[test]
fn monte_carlo_agrees_with_closed_form_and_binomial() {
    let lim = example1(InterferenceGraph::circulant(60, 2).unwrap());
    let r = estimands_monte_carlo(&lim, &bern(60, 0.5), 10_000, 3, DEFAULT_FD_STEP).unwrap();
    // linear contrasts are constant in W, so SE is 0 and only rounding remains
    assert!(r.se_aie < 1e-12);
    assert!((r.aie - 0.3).abs() <= 4.0 * r.se_aie + 1e-12, "{r:?}");

    let herd = make_fig1_setting(Fig1SettingSpec {
        setting: 2,
        graph: InterferenceGraph::circulant(60, 3).unwrap(),
    })
    .unwrap();
    let r = estimands_monte_carlo(&herd, &bern(60, 0.5), 10_000, 4, DEFAULT_FD_STEP).unwrap();
    let v = anonymous_binomial_values(&herd, 0.5).unwrap();
    assert!((r.ade - v.ade).abs() <= 4.0 * r.se_ade, "{r:?} {v:?}");
    assert!((r.aie - v.aie).abs() <= 4.0 * r.se_aie, "{r:?} {v:?}");
    assert_eq!(r.aoe, r.ade + r.aie);
}

#[test]
fn monte_carlo_converges_on_a_battery() {
    let opts = BatteryOptions { min_n: 4, max_n: 9, seed: 77, ..BatteryOptions::default() };
    let mut within = 0;
    let total = 20;
    for k in 0..total {
        let (model, pi) = battery_instance(InstanceKind::ALL[k % 4], &opts, k).unwrap();
        let design: Design = BernoulliDesign::new(pi).into();
        let (ade, aie) = estimands_exact(&model, &design).unwrap();
        let r = estimands_monte_carlo(&model, &design, 4000, k as u64, DEFAULT_FD_STEP).unwrap();
        if (r.ade - ade).abs() <= 4.0 * r.se_ade + 1e-12 && (r.aie - aie).abs() <= 4.0 * r.se_aie + 1e-12 {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.99 * total as f64, "{within}/{total}");
}

#[test]
fn monte_carlo_inf_uses_common_random_numbers() {
    let model = make_fig1_setting(Fig1SettingSpec {
        setting: 2,
        graph: InterferenceGraph::circulant(40, 2).unwrap(),
    })
    .unwrap();
    let pi = ProbabilityVector::constant(40, 0.5).unwrap();
    let truth = anonymous_binomial_values(&model, 0.5).unwrap().derivative;
    let fd = inf_finite_difference(&model, &pi, 0.02, FdMode::MonteCarlo { replications: 20_000, seed: 5 }).unwrap();
    assert!((fd - truth).abs() < 0.1, "{fd} vs {truth}");
}

#[test]
fn two_stage_reports_no_inf() {
    let model = example1(InterferenceGraph::circulant(8, 1).unwrap());
    let d: Design = TwoStageClusteredDesign::new(8, 2, 0.5).unwrap().into();
    let r = compute_estimands(&model, &d, Method::Auto, &EstimandOptions::default()).unwrap();
    assert_eq!(r.method, Method::Exact);
    assert!(r.inf.is_none());
}

#[test]
fn hh_de_constant_model_is_zero() {
    let model = NoInterference::constant(4, 2.5, 0.0);
    let d: Design = TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into();
    assert!(hh_de(&model, &d).unwrap().abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binomial_equals_enumeration(setting in 1u8..=3, n in 5usize..=10, hw in 1usize..=2, pi0 in 0.05f64..0.95) {
        prop_assume!(2 * hw < n);
        let model = make_fig1_setting(Fig1SettingSpec {
            setting,
            graph: InterferenceGraph::circulant(n, hw).unwrap(),
        }).unwrap();
        let v = anonymous_binomial_values(&model, pi0).unwrap();
        let (ade, aie) = estimands_exact(&model, &bern(n, pi0)).unwrap();
        prop_assert!((ade - v.ade).abs() < 1e-10);
        prop_assert!((aie - v.aie).abs() < 1e-10);
        prop_assert!((v.derivative - (ade + aie)).abs() < 1e-10);
    }

    #[test]
    fn saturated_value_function_is_affine(pi in proptest::collection::vec(0.05f64..0.95, 4), seed in 0u64..1000) {
        let nu: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { ((seed as usize + 3 * i + j) % 5) as f64 / 4.0 - 0.5 }).collect())
            .collect();
        let beta = vec![0.5, -1.0, 2.0, 0.25];
        let expected = beta.iter().sum::<f64>() / 4.0 + nu.iter().flatten().sum::<f64>() / 4.0;
        let model = make_saturated_linear(SaturatedLinearSpec { alpha: vec![0.0; 4], beta, nu }).unwrap();
        let p = ProbabilityVector::new(pi).unwrap();
        for h in [1e-4, 1e-2] {
            if let Ok(fd) = inf_finite_difference(&model, &p, h, FdMode::Exact) {
                prop_assert!((fd - expected).abs() < 1e-9);
            }
        }
    }
}
