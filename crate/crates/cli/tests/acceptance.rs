//! Acceptance suite: every exit criterion as one test, each printing a
//! single pass/fail line (visible with `--nocapture`; the assertions make
//! the verdicts part of the ordinary test output either way).
//!
//! Tolerances and sample budgets are pinned here, in code.

use dynell_cli::config::RunConfig;
use dynell_cli::{output, run};
use dynell_core::felder::{self, RKind};
use dynell_core::gaudin::{self, sl2, GaudinModel};
use dynell_core::lops::{self, LopRole};
use dynell_core::opalg::SiteKind;
use dynell_core::theta;
use dynell_core::{Ctx, SamplingPolicy, C64};
use dynell_core::num_complex::ComplexFloat;
use std::time::Instant;

fn ctx_n(n: usize) -> Ctx {
    Ctx::standard(n).unwrap()
}

fn policy(samples: u32, seed: u64) -> SamplingPolicy {
    SamplingPolicy::new(samples, seed)
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn single_site_lop(ctx: &Ctx) -> lops::DynamicalLOperator {
    lops::lop_from_r(ctx, C64::new(0.31, 0.0), LopRole::SecondSpace).unwrap()
}

#[test]
fn criterion_01_theta_axioms() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for tau in [C64::new(0.0, 1.1), C64::new(0.2, 0.9)] {
        let p = dynell_core::EllipticParams::with_tau(tau).unwrap();
        let mut s = dynell_core::sampling::Sampler::new(SamplingPolicy {
            samples: 100,
            seed: 1,
            re_range: (-0.5, 0.5),
            im_range: (-tau.im, tau.im),
            max_retries: 20,
        });
        for _ in 0..100 {
            let u = s.complex();
            let t = theta::theta(u, &p).unwrap();
            let odd = (t + theta::theta(-u, &p).unwrap()).abs() / (1.0 + t.abs());
            let per1 = (theta::theta(u + 1.0, &p).unwrap() + t).abs() / (1.0 + t.abs());
            let pref = (-C64::i() * core::f64::consts::PI * (u * 2.0 + tau)).exp();
            let pertau =
                (theta::theta(u + tau, &p).unwrap() + pref * t).abs() / (1.0 + t.abs());
            worst = worst.max(odd).max(per1).max(pertau);
        }
        let d0 = (theta::theta_deriv(1, C64::new(0.0, 0.0), &p).unwrap() - 1.0).abs();
        worst = worst.max(d0);
    }
    let elapsed = start.elapsed();
    verdict(
        "1 theta axioms",
        worst < 1e-10 && elapsed.as_secs() < 5,
        &format!("max_rel {worst:.3e}, {} ms", elapsed.as_millis()),
    );
}

#[test]
fn criterion_02_dybe_family() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let p = policy(8, 1);
        worst = worst.max(
            felder::dybe_residual(&ctx, RKind::EllipticDynamical, p, 1e-9, "acc:DYBE")
                .unwrap()
                .max_rel,
        );
        worst = worst.max(felder::unitarity_residual(&ctx, p, 1e-9, "acc:unit").unwrap().max_rel);
        worst = worst.max(
            felder::weight_zero_residual(&ctx, p, 1e-9, "acc:wz").unwrap().max_rel,
        );
        worst = worst.max(felder::dcommute_residual(&ctx, p, 1e-9, "acc:dc").unwrap().max_rel);
    }
    let elapsed = start.elapsed();
    verdict(
        "2 DYBE/unitarity/weight-zero/D-commute n=2,3",
        worst < 1e-9 && elapsed.as_secs() < 20,
        &format!("max_rel {worst:.3e}, {} ms", elapsed.as_millis()),
    );
}

#[test]
fn criterion_03_r_minus_hbar() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let rep =
            felder::r_minus_hbar_residual(&ctx_n(n), policy(8, 1), 1e-10, "acc:mhbar").unwrap();
        worst = worst.max(rep.max_rel);
    }
    verdict(
        "3 R(-hbar) factorization n=2,3",
        worst < 1e-10,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_04_manin_family() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let p = policy(4, 2);
        let single = single_site_lop(&ctx);
        let fused = {
            let b = lops::lop_from_r(&ctx, C64::new(-0.22, 0.11), LopRole::SecondSpace).unwrap();
            lops::fuse(&ctx, &b, &single).unwrap()
        };
        let inverse = lops::lop_from_r(&ctx, C64::new(0.29, 0.07), LopRole::Inverse).unwrap();
        for (l, tag) in [(&single, "single"), (&fused, "fused"), (&inverse, "invR")] {
            let chk = lops::manin_of_lop(&ctx, l, &format!("acc:manin:{tag}"), p, 1e-9).unwrap();
            worst = worst.max(chk.max_rel());
        }
        // The explicit inverse both inverts M and is itself a Manin matrix.
        worst = worst.max(
            lops::manin_inverse_residual(&ctx, &single, p, 1e-9, "acc:minv").unwrap().max_rel,
        );
        let minv = lops::manin_inverse_from_lop(&ctx, &single).unwrap();
        let chk =
            dynell_core::opalg::manin_check(&ctx, &minv, "acc:minv-manin", "M_inv", p, 1e-9)
                .unwrap();
        worst = worst.max(chk.max_rel());
    }
    verdict(
        "4 Manin property of L-family n=2,3",
        worst < 1e-9,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_05_fused_ordering_and_sandwiches() {
    let ctx = ctx_n(2);
    let p = policy(5, 3);
    let mut worst: f64 = 0.0;
    for (m, big_n) in [(1usize, 3usize), (2, 4), (1, 2)] {
        worst = worst.max(
            lops::fused_ordering_residual(&ctx, m, big_n, p, 1e-9, "acc:order")
                .unwrap()
                .max_rel,
        );
        worst = worst.max(
            lops::ar_ara_residual(&ctx, m, big_n, p, 1e-9, "acc:arara").unwrap().max_rel,
        );
    }
    let l = single_site_lop(&ctx);
    for (m0, big_n) in [(0usize, 2usize), (1, 3), (1, 4)] {
        worst = worst.max(
            lops::alll_residual(&ctx, &l, m0, big_n, p, 1e-9, "acc:alll").unwrap().max_rel,
        );
    }
    for (m0, big_n) in [(0usize, 2usize), (1, 3)] {
        worst = worst.max(
            lops::alll_inv_residual(&ctx, &l, m0, big_n, p, 1e-9, "acc:alll-inv")
                .unwrap()
                .max_rel,
        );
    }
    verdict(
        "5 fused ordering + sandwich identities N<=4",
        worst < 1e-9,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_06_char_poly() {
    let mut worst_det: f64 = 0.0;
    let mut worst_tra: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let l = single_site_lop(&ctx);
        worst_det = worst_det.max(
            lops::char_poly_residual(&ctx, &l, policy(5, 4), 1e-8, "acc:cp").unwrap().max_rel,
        );
        worst_tra = worst_tra.max(
            lops::det_tra_residual(&ctx, &l, policy(5, 5), 1e-9, "acc:dettra").unwrap().max_rel,
        );
    }
    verdict(
        "6 characteristic polynomial n=2,3",
        worst_det < 1e-8 && worst_tra < 1e-9,
        &format!("det_gener {worst_det:.3e}, det_trA {worst_tra:.3e}"),
    );
}

#[test]
fn criterion_07_trace_exchange() {
    let start = Instant::now();
    let ctx = ctx_n(2);
    let l = single_site_lop(&ctx);
    let mut worst: f64 = 0.0;
    for (m, s) in [(1usize, 1usize), (1, 2), (2, 1)] {
        let rep =
            lops::trace_exchange_residual(&ctx, &l, m, s, policy(8, 6), 1e-8, "acc:ttto")
                .unwrap();
        worst = worst.max(rep.max_rel);
    }
    let elapsed = start.elapsed();
    verdict(
        "7 exact trace exchange (1,1),(1,2),(2,1)",
        worst < 1e-8 && elapsed.as_secs() < 120,
        &format!("max_rel {worst:.3e}, {} ms", elapsed.as_millis()),
    );
}

#[test]
fn criterion_08_newton() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let l = single_site_lop(&ctx);
        worst = worst.max(
            lops::newton_residual(&ctx, &l, n + 1, policy(4, 7), 1e-9, "acc:newton-q")
                .unwrap()
                .max_rel,
        );
        worst = worst.max(
            lops::quantum_power_residual(&ctx, &l, 3, policy(4, 8), 1e-9, "acc:qpow")
                .unwrap()
                .max_rel,
        );
    }
    // Classical flavor including the vanishing order m = n+1 at rank 2.
    let ctx = ctx_n(2);
    let model = GaudinModel::new(
        2,
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Defining, C64::new(0.45, 0.0)),
        ],
        false,
    )
    .unwrap();
    let l = model.l_operator(&ctx);
    worst = worst.max(
        gaudin::newton_classical_residual(&ctx, &l, 3, policy(3, 9), 1e-9, "acc:newton-c")
            .unwrap()
            .max_rel,
    );
    verdict(
        "8 Newton identities m<=n+1, both flavors",
        worst < 1e-9,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_09_cartan_commutation() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let l = single_site_lop(&ctx);
        worst = worst.max(
            lops::ht_th_residual(&ctx, &l, policy(5, 10), 1e-10, "acc:htth").unwrap().max_rel,
        );
        let model = GaudinModel::new(
            n,
            vec![
                (SiteKind::Defining, C64::new(0.1, 0.0)),
                (SiteKind::Defining, C64::new(0.45, 0.0)),
            ],
            false,
        )
        .unwrap();
        let cl = model.l_operator(&ctx);
        worst = worst.max(
            gaudin::cartan_residual_s(&ctx, &cl, policy(5, 11), 1e-10, "acc:hssh")
                .unwrap()
                .max_rel,
        );
    }
    verdict(
        "9 Cartan commutation ht_th / hs_sh",
        worst < 1e-10,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_10_classical_degeneration() {
    let mut worst_limit: f64 = 0.0;
    let mut worst_cl: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        worst_limit = worst_limit.max(
            felder::classical_limit_residual(
                &ctx,
                &[1e-2, 5e-3, 2.5e-3],
                policy(4, 12),
                1e-5,
                "acc:limit",
            )
            .unwrap()
            .max_rel,
        );
        worst_cl = worst_cl.max(
            felder::cdybe_residual(&ctx, policy(5, 13), 1e-9, "acc:cdybe").unwrap().max_rel,
        );
        worst_cl = worst_cl.max(
            felder::classical_twist_residual(&ctx, policy(5, 14), 1e-9, "acc:twist")
                .unwrap()
                .max_rel,
        );
    }
    verdict(
        "10 classical degeneration + CDYBE + twist",
        worst_limit < 1e-5 && worst_cl < 1e-9,
        &format!("limit {worst_limit:.3e}, classical {worst_cl:.3e}"),
    );
}

#[test]
fn criterion_11_gaudin_rll() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        for sites in [
            vec![
                (SiteKind::Defining, C64::new(0.1, 0.0)),
                (SiteKind::Defining, C64::new(0.45, 0.0)),
            ],
            vec![
                (SiteKind::Defining, C64::new(0.1, 0.0)),
                (SiteKind::Dual, C64::new(0.45, 0.0)),
            ],
        ] {
            let model = GaudinModel::new(n, sites, false).unwrap();
            let l = model.l_operator(&ctx);
            worst = worst.max(
                gaudin::rll_classical_residual(&ctx, &l, policy(4, 15), 1e-9, "acc:rll")
                    .unwrap()
                    .max_rel,
            );
            worst = worst.max(
                gaudin::ehl_classical_residual(&ctx, &l, policy(4, 16), 1e-9, "acc:ehlg")
                    .unwrap()
                    .max_rel,
            );
        }
    }
    verdict(
        "11 Gaudin rLL + EhL n=2,3",
        worst < 1e-9,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_12_gaudin_commutativity() {
    let start = Instant::now();
    let ctx = ctx_n(2);
    let model = GaudinModel::new(
        2,
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Dual, C64::new(0.45, 0.0)),
        ],
        false,
    )
    .unwrap();
    let l = model.l_operator(&ctx);
    let uv = [
        (C64::new(0.21, 0.03), C64::new(-0.14, 0.06)),
        (C64::new(-0.08, -0.05), C64::new(0.33, 0.02)),
        (C64::new(0.36, 0.07), C64::new(0.04, -0.09)),
        (C64::new(-0.27, 0.04), C64::new(-0.02, 0.11)),
    ];
    let rep = gaudin::commutativity_on_zero_weight(
        &ctx,
        &l,
        &[(1, 1), (1, 2), (2, 1), (2, 2)],
        &uv,
        policy(3, 17),
        1e-8,
        "acc:ssss2",
    )
    .unwrap();
    let mut worst = rep.max_rel;

    // Rank 3: three defining sites under the traceless projection (joint
    // zero weight = permutation basis, dim 6); pairs capped at the
    // supported theta-derivative order.
    let ctx3 = ctx_n(3);
    let model3 = GaudinModel::new(
        3,
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Defining, C64::new(0.45, 0.0)),
            (SiteKind::Defining, C64::new(-0.21, 0.0)),
        ],
        true,
    )
    .unwrap();
    let l3 = model3.l_operator(&ctx3);
    let rep3 = gaudin::commutativity_on_zero_weight(
        &ctx3,
        &l3,
        &[(1, 2), (2, 1), (2, 2), (1, 3), (3, 1)],
        &uv[..1],
        policy(2, 18),
        1e-8,
        "acc:ssss3",
    )
    .unwrap();
    worst = worst.max(rep3.max_rel);
    let elapsed = start.elapsed();
    verdict(
        "12 commutativity on zero-weight subspace",
        worst < 1e-8 && elapsed.as_secs() < 60,
        &format!("max_rel {worst:.3e}, {} ms", elapsed.as_millis()),
    );
}

#[test]
fn criterion_13_twist_identity() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        let ctx = ctx_n(n);
        let model = GaudinModel::new(
            n,
            vec![
                (SiteKind::Defining, C64::new(0.1, 0.0)),
                (SiteKind::Defining, C64::new(0.45, 0.0)),
            ],
            false,
        )
        .unwrap();
        worst = worst.max(
            gaudin::twisted_gaudin_residual(&ctx, &model, policy(4, 19), 1e-8, "acc:qlt")
                .unwrap()
                .max_rel,
        );
    }
    verdict(
        "13 twisted determinant identity n=2,3",
        worst < 1e-8,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_14_sl2_suite() {
    let ctx = Ctx::standard(2).unwrap();
    let sites2 = [C64::new(0.1, 0.0), C64::new(0.45, 0.0)];
    let sites4 = [
        C64::new(0.1, 0.0),
        C64::new(0.45, 0.0),
        C64::new(-0.21, 0.0),
        C64::new(0.3, 0.2),
    ];
    let mut worst: f64 = 0.0;
    for sites in [&sites2[..], &sites4[..]] {
        let model = sl2::sl2_model(sites).unwrap();
        worst = worst.max(
            sl2::s_forms_residual(&ctx, &model, policy(4, 20), 1e-8, "acc:forms")
                .unwrap()
                .max_rel,
        );
        worst = worst.max(
            sl2::s_commutativity_residual(
                &ctx,
                &model,
                (C64::new(0.21, 0.04), C64::new(-0.17, 0.08)),
                policy(3, 21),
                1e-8,
                "acc:ss",
            )
            .unwrap()
            .max_rel,
        );
        worst = worst.max(
            sl2::pipeline_crosscheck_residual(&ctx, &model, policy(3, 22), 1e-8, "acc:pipe")
                .unwrap()
                .max_rel,
        );
    }
    verdict(
        "14 sl2 generating function on (C^2)^2 and (C^2)^4",
        worst < 1e-8,
        &format!("max_rel {worst:.3e}"),
    );
}

#[test]
fn criterion_15_classical_powers() {
    let ctx = ctx_n(2);
    let model = GaudinModel::new(
        2,
        vec![
            (SiteKind::Defining, C64::new(0.1, 0.0)),
            (SiteKind::Dual, C64::new(0.45, 0.0)),
        ],
        false,
    )
    .unwrap();
    let l = model.l_operator(&ctx);
    let recursion = gaudin::classical_power_binomial_residual(
        &ctx,
        &l,
        2,
        policy(4, 23),
        1e-8,
        "acc:rec",
    )
    .unwrap()
    .max_rel;
    let newton = gaudin::newton_classical_residual(&ctx, &l, 2, policy(3, 24), 1e-8, "acc:nc")
        .unwrap()
        .max_rel;
    let comm = gaudin::power_trace_commutativity(
        &ctx,
        &l,
        2,
        (C64::new(0.22, 0.04), C64::new(-0.13, 0.07)),
        policy(3, 25),
        1e-8,
        "acc:pcomm",
    )
    .unwrap()
    .max_rel;
    let worst = recursion.max(newton).max(comm);
    verdict(
        "15 classical quantum powers",
        worst < 1e-8,
        &format!("recursion {recursion:.3e}, newton {newton:.3e}, commute {comm:.3e}"),
    );
}

#[test]
fn criterion_16_trigonometric() {
    let ctx = ctx_n(2);
    let p = policy(6, 26);
    let g6 = felder::trig_limit_gap(&ctx, 6.0, p, 1e-6, "acc:lim6").unwrap().max_rel;
    let g8 = felder::trig_limit_gap(&ctx, 8.0, p, 1e-6, "acc:lim8").unwrap().max_rel;
    let fconj =
        felder::trig_f_conjugation_residual(&ctx, p, 1e-12, "acc:fconj").unwrap().max_rel;
    let body = lops::trig_lop_body(&ctx, RKind::TrigNonDynamical);
    let m = lops::trig_manin(&ctx, &body).unwrap();
    let manin_plain =
        dynell_core::opalg::manin_check(&ctx, &m, "acc:tm", "Rtrig", p, 1e-9).unwrap().max_rel();
    let gbody = lops::twisted_trig_body(&ctx).unwrap();
    let gm = lops::trig_manin(&ctx, &gbody).unwrap();
    let manin_twisted = dynell_core::opalg::manin_check(&ctx, &gm, "acc:tmg", "Rtildetrig", p, 1e-9)
        .unwrap()
        .max_rel();
    let nondyn = felder::trig_nondyn_limit_residual(&ctx, 6.0, p, 1e-4, "acc:nondyn")
        .unwrap()
        .max_rel;
    // Limit residuals below 1e-12 count as converged for the trend check.
    let trend_ok = g8 <= g6.max(1e-12);
    let pass = g8 < 1e-6
        && trend_ok
        && fconj < 1e-12
        && manin_plain < 1e-9
        && manin_twisted < 1e-9
        && nondyn < 1e-4;
    verdict(
        "16 trigonometric suite",
        pass,
        &format!(
            "gap6 {g6:.3e} -> gap8 {g8:.3e}, F-conj {fconj:.3e}, manin {manin_plain:.3e}/{manin_twisted:.3e}, nondyn {nondyn:.3e}"
        ),
    );
}

#[test]
fn criterion_17_cli_determinism() {
    let mut cfg = RunConfig::default();
    cfg.zero_wall_time = true;
    let out1 = run(&cfg).unwrap();
    let out2 = run(&cfg).unwrap();
    let doc1 = output::write_document(&cfg, &out1);
    let doc2 = output::write_document(&cfg, &out2);
    let pass = doc1 == doc2 && out1.all_passed();
    verdict(
        "17 CLI determinism + default run passes",
        pass,
        &format!(
            "byte-identical: {}, passed {}/{}",
            doc1 == doc2,
            out1.passed,
            out1.reports.len()
        ),
    );
}
