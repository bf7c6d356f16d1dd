//! The identity catalogue: every verified identity with its stable id,
//! equation anchor, suite, tolerance class and runner.

use crate::config::{RunConfig, Suite};
use anyhow::Result;
use dynell_core::felder::{self, RKind};
use dynell_core::gaudin::{self, sl2, GaudinModel};
use dynell_core::lops::{self, DynamicalLOperator, LopRole};
use dynell_core::opalg::manin_check;
use dynell_core::report::mixed_rel;
use dynell_core::theta;
use dynell_core::{Ctx, ResidualReport, SamplingPolicy, C64};
use dynell_core::num_complex::ComplexFloat;

pub struct RunEnv {
    pub cfg: RunConfig,
    pub ctx: Ctx,
    pub policy: SamplingPolicy,
}

type Runner = Box<dyn Fn(&RunEnv, &str, f64) -> dynell_core::Result<ResidualReport>>;

pub struct Check {
    pub id: String,
    pub anchor: &'static str,
    pub suite: Suite,
    pub tol: f64,
    runner: Runner,
}

impl Check {
    fn new(
        id: String,
        anchor: &'static str,
        suite: Suite,
        tol: f64,
        runner: Runner,
    ) -> Check {
        Check { id, anchor, suite, tol, runner }
    }

    pub fn execute(&self, env: &RunEnv) -> ResidualReport {
        let started = std::time::Instant::now();
        let mut rep = match (self.runner)(env, &self.id, self.tol) {
            Ok(mut rep) => {
                rep.identity_id = self.id.clone();
                rep.paper_anchor = self.anchor.into();
                rep
            }
            Err(e) => {
                let mut rep = ResidualReport::new(&self.id, self.anchor, self.tol, env.policy.seed);
                rep.pass = false;
                rep.status = format!("error: {e}");
                rep
            }
        };
        rep.wall_time_ms = started.elapsed().as_millis() as u64;
        if env.cfg.zero_wall_time {
            rep.wall_time_ms = 0;
        }
        rep
    }
}

fn single_lop(env: &RunEnv) -> dynell_core::Result<DynamicalLOperator> {
    lops::lop_from_r(&env.ctx, env.cfg.sites[0].1, LopRole::SecondSpace)
}

fn fused_lop(env: &RunEnv) -> dynell_core::Result<DynamicalLOperator> {
    let v2 = env
        .cfg
        .sites
        .get(1)
        .map(|s| s.1)
        .unwrap_or(C64::new(0.45, 0.0));
    let a = lops::lop_from_r(&env.ctx, env.cfg.sites[0].1, LopRole::SecondSpace)?;
    let b = lops::lop_from_r(&env.ctx, v2, LopRole::SecondSpace)?;
    lops::fuse(&env.ctx, &b, &a)
}

/// The Gaudin model for the configured sites; the traceless projection is
/// switched on automatically when the plain joint zero-weight subspace is
/// trivial (commutativity would be vacuous otherwise).
pub fn resolve_model(env: &RunEnv) -> dynell_core::Result<GaudinModel> {
    let plain = GaudinModel::new(env.cfg.n, env.cfg.sites.clone(), false)?;
    if plain.zero_weight_projector().1 > 0 {
        return Ok(plain);
    }
    let traceless = GaudinModel::new(env.cfg.n, env.cfg.sites.clone(), true)?;
    if traceless.zero_weight_projector().1 > 0 {
        Ok(traceless)
    } else {
        Ok(plain)
    }
}

fn merged_manin(
    env: &RunEnv,
    id: &str,
    tol: f64,
    m: &dynell_core::opalg::AuxTensor,
    anchor: &'static str,
) -> dynell_core::Result<ResidualReport> {
    let chk = manin_check(&env.ctx, m, id, anchor, env.policy, tol)?;
    let mut rep = ResidualReport::new(id, anchor, tol, env.policy.seed);
    rep.absorb(&chk.sandwich);
    rep.absorb(&chk.submatrix);
    Ok(rep)
}

fn ss_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        1 => vec![(1, 1)],
        2 => vec![(1, 1), (1, 2), (2, 1), (2, 2)],
        // Rank 3 pairs are capped at the supported theta-derivative
        // order inside the normal-ordered commutator.
        _ => vec![(1, 2), (2, 1), (2, 2), (1, 3), (3, 1)],
    }
}

fn uv_pairs(n: usize) -> Vec<(C64, C64)> {
    let all = [
        (C64::new(0.21, 0.03), C64::new(-0.14, 0.06)),
        (C64::new(-0.08, -0.05), C64::new(0.33, 0.02)),
        (C64::new(0.36, 0.07), C64::new(0.04, -0.09)),
        (C64::new(-0.27, 0.04), C64::new(-0.02, 0.11)),
    ];
    if n >= 3 {
        all[..1].to_vec()
    } else {
        all.to_vec()
    }
}

/// All identity checks for this configuration, in catalogue order.
pub fn catalogue(cfg: &RunConfig) -> Vec<Check> {
    let n = cfg.n;
    let mut checks: Vec<Check> = Vec::new();
    let mut add = |id: String,
                   anchor: &'static str,
                   suite: Suite,
                   tol: f64,
                   runner: Runner| {
        checks.push(Check::new(id, anchor, suite, cfg.tol_for(tol), runner));
    };

    // ---- theta ----------------------------------------------------
    add(
        "theta:oddness".into(),
        "theta-props",
        Suite::Theta,
        1e-12,
        Box::new(|env, id, tol| {
            let mut rep = ResidualReport::new(id, "theta-props", tol, env.policy.seed);
            let mut s = dynell_core::sampling::Sampler::for_identity(env.policy, id);
            for _ in 0..100 {
                let u = s.complex();
                let a = theta::theta(u, &env.ctx.ell)?;
                let b = theta::theta(-u, &env.ctx.ell)?;
                rep.record((a + b).abs(), mixed_rel((a + b).abs(), a.abs()));
            }
            Ok(rep)
        }),
    );
    add(
        "theta:quasi-period-1".into(),
        "theta-props",
        Suite::Theta,
        1e-10,
        Box::new(|env, id, tol| {
            let mut rep = ResidualReport::new(id, "theta-props", tol, env.policy.seed);
            let mut s = dynell_core::sampling::Sampler::for_identity(env.policy, id);
            for _ in 0..100 {
                let u = s.complex();
                let a = theta::theta(u + 1.0, &env.ctx.ell)?;
                let b = theta::theta(u, &env.ctx.ell)?;
                rep.record((a + b).abs(), mixed_rel((a + b).abs(), b.abs()));
            }
            Ok(rep)
        }),
    );
    add(
        "theta:quasi-period-tau".into(),
        "theta-props",
        Suite::Theta,
        1e-10,
        Box::new(|env, _id, tol| {
            let mut rep =
                theta::theta_quasi_periodicity_residual(100, &env.ctx.ell, env.policy.seed)?;
            rep.tol = tol;
            rep.pass = rep.max_rel < tol;
            Ok(rep)
        }),
    );
    add(
        "theta:deriv-at-0".into(),
        "theta-props",
        Suite::Theta,
        1e-10,
        Box::new(|env, id, tol| {
            let mut rep = ResidualReport::new(id, "theta-props", tol, env.policy.seed);
            let d = theta::theta_deriv(1, C64::new(0.0, 0.0), &env.ctx.ell)?;
            rep.record((d - 1.0).abs(), (d - 1.0).abs());
            Ok(rep)
        }),
    );

    // ---- felder ----------------------------------------------------
    add(
        format!("DYBE:n={n}"),
        "DYBE",
        Suite::Felder,
        1e-9,
        Box::new(|env, id, tol| {
            felder::dybe_residual(&env.ctx, RKind::EllipticDynamical, env.policy, tol, id)
        }),
    );
    add(
        format!("unitarity:n={n}"),
        "R21R12",
        Suite::Felder,
        1e-9,
        Box::new(|env, id, tol| felder::unitarity_residual(&env.ctx, env.policy, tol, id)),
    );
    add(
        format!("weight-zero:n={n}"),
        "EER_REE",
        Suite::Felder,
        1e-10,
        Box::new(|env, id, tol| felder::weight_zero_residual(&env.ctx, env.policy, tol, id)),
    );
    add(
        format!("D-commute:n={n}"),
        "DR_RD",
        Suite::Felder,
        1e-9,
        Box::new(|env, id, tol| felder::dcommute_residual(&env.ctx, env.policy, tol, id)),
    );
    add(
        format!("R-mhbar-factorization:n={n}"),
        "R_mhbar",
        Suite::Felder,
        1e-10,
        Box::new(|env, id, tol| felder::r_minus_hbar_residual(&env.ctx, env.policy, tol, id)),
    );
    add(
        format!("classical-limit:n={n}"),
        "LqLc",
        Suite::Felder,
        1e-5,
        Box::new(|env, id, tol| {
            felder::classical_limit_residual(
                &env.ctx,
                &[1e-2, 5e-3, 2.5e-3],
                env.policy,
                tol,
                id,
            )
        }),
    );
    add(
        format!("CDYBE:n={n}"),
        "CDYBE",
        Suite::Felder,
        1e-9,
        Box::new(|env, id, tol| felder::cdybe_residual(&env.ctx, env.policy, tol, id)),
    );
    add(
        format!("classical-twist:n={n}"),
        "cdtwist",
        Suite::Felder,
        1e-9,
        Box::new(|env, id, tol| felder::classical_twist_residual(&env.ctx, env.policy, tol, id)),
    );

    // ---- manin -----------------------------------------------------
    add(
        format!("manin:single-site:n={n}"),
        "AMM_AMMA",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            let m = lops::manin_from_lop(&env.ctx, &l)?;
            merged_manin(env, id, tol, &m, "AMM_AMMA")
        }),
    );
    add(
        format!("manin:fused-sites:n={n}"),
        "AMM_AMMA",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let l = fused_lop(env)?;
            let m = lops::manin_from_lop(&env.ctx, &l)?;
            merged_manin(env, id, tol, &m, "AMM_AMMA")
        }),
    );
    add(
        format!("manin:inverse-R:n={n}"),
        "AMM_AMMA",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let l = lops::lop_from_r(&env.ctx, env.cfg.sites[0].1, LopRole::Inverse)?;
            let m = lops::manin_from_lop(&env.ctx, &l)?;
            merged_manin(env, id, tol, &m, "AMM_AMMA")
        }),
    );
    add(
        format!("M-inverse:consistency:n={n}"),
        "MDLopIn",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::manin_inverse_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        format!("manin:M-inverse:n={n}"),
        "M_inv",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            let minv = lops::manin_inverse_from_lop(&env.ctx, &l)?;
            merged_manin(env, id, tol, &minv, "M_inv")
        }),
    );
    add(
        format!("manin:classical:n={n}"),
        "chpolGaudin",
        Suite::Manin,
        1e-9,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            let l = model.l_operator(&env.ctx);
            let m = gaudin::classical_manin(&l);
            merged_manin(env, id, tol, &m, "chpolGaudin")
        }),
    );

    // ---- commfam ---------------------------------------------------
    add(
        "RLL:single-site".into(),
        "DRLL",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::rll_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "RLL:fused-sites".into(),
        "lem_LL",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = fused_lop(env)?;
            lops::rll_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "RLL:inverse-R".into(),
        "DRLL",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = lops::lop_from_r(&env.ctx, env.cfg.sites[0].1, LopRole::Inverse)?;
            lops::rll_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "RLL:symmetric-form".into(),
        "RLLSym",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::rll_sym_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "EhL:single-site".into(),
        "EhL_LEh",
        Suite::Commfam,
        1e-10,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::ehl_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "fused-ordering:m=1,N=3".into(),
        "RprRi=RprRj",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            lops::fused_ordering_residual(&env.ctx, 1, 3, env.policy, tol, id)
        }),
    );
    add(
        "AR_ARA:m=1,N=3".into(),
        "AR_ARA",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| lops::ar_ara_residual(&env.ctx, 1, 3, env.policy, tol, id)),
    );
    if n <= 2 {
        add(
            "AR_ARA:m=2,N=4".into(),
            "AR_ARA",
            Suite::Commfam,
            1e-9,
            Box::new(|env, id, tol| lops::ar_ara_residual(&env.ctx, 2, 4, env.policy, tol, id)),
        );
        add(
            "fused-ordering:m=2,N=4".into(),
            "RprRi=RprRj",
            Suite::Commfam,
            1e-9,
            Box::new(|env, id, tol| {
                lops::fused_ordering_residual(&env.ctx, 2, 4, env.policy, tol, id)
            }),
        );
    }
    add(
        "ALLL:m=0,N=2".into(),
        "ALLL_ALLLA",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::alll_residual(&env.ctx, &l, 0, 2, env.policy, tol, id)
        }),
    );
    add(
        "ALLL:m=1,N=3".into(),
        "ALLL_ALLLA",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::alll_residual(&env.ctx, &l, 1, 3, env.policy, tol, id)
        }),
    );
    add(
        "ALLL-inverse:m=0,N=2".into(),
        "ALLL_ALLLA_inv",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::alll_inv_residual(&env.ctx, &l, 0, 2, env.policy, tol, id)
        }),
    );
    add(
        "DReLLeLL:m=1,N=2".into(),
        "DReLLeLL",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::dre_ll_residual(&env.ctx, &l, 1, 2, env.policy, tol, id)
        }),
    );
    if n <= 2 {
        add(
            "DReLLeLL:m=2,N=3".into(),
            "DReLLeLL",
            Suite::Commfam,
            1e-9,
            Box::new(|env, id, tol| {
                let l = single_lop(env)?;
                lops::dre_ll_residual(&env.ctx, &l, 2, 3, env.policy, tol, id)
            }),
        );
    }
    add(
        format!("ht_th:n={n}"),
        "ht_th",
        Suite::Commfam,
        1e-10,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::ht_th_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        format!("char-poly:n={n}"),
        "det_gener",
        Suite::Commfam,
        1e-8,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::char_poly_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        format!("det_trA:n={n}"),
        "det_trA",
        Suite::Commfam,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::det_tra_residual(&env.ctx, &l, env.policy, tol, id)
        }),
    );
    add(
        "tt_tt0:m=1,s=1".into(),
        "tt_tt0",
        Suite::Commfam,
        1e-8,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::trace_exchange_residual(&env.ctx, &l, 1, 1, env.policy, tol, id)
        }),
    );
    if n <= 2 {
        add(
            "tt_tt0:m=1,s=2".into(),
            "tt_tt0",
            Suite::Commfam,
            1e-8,
            Box::new(|env, id, tol| {
                let l = single_lop(env)?;
                lops::trace_exchange_residual(&env.ctx, &l, 1, 2, env.policy, tol, id)
            }),
        );
        add(
            "tt_tt0:m=2,s=1".into(),
            "tt_tt0",
            Suite::Commfam,
            1e-8,
            Box::new(|env, id, tol| {
                let l = single_lop(env)?;
                lops::trace_exchange_residual(&env.ctx, &l, 2, 1, env.policy, tol, id)
            }),
        );
    }

    // ---- newton ----------------------------------------------------
    add(
        format!("newton:quantum:n={n}"),
        "q_mdef",
        Suite::Newton,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::newton_residual(&env.ctx, &l, env.cfg.n + 1, env.policy, tol, id)
        }),
    );
    add(
        format!("quantum-powers:n={n}"),
        "q_mdef",
        Suite::Newton,
        1e-9,
        Box::new(|env, id, tol| {
            let l = single_lop(env)?;
            lops::quantum_power_residual(&env.ctx, &l, 3, env.policy, tol, id)
        }),
    );
    add(
        format!("newton:classical:n={n}"),
        "q_mdef",
        Suite::Newton,
        1e-9,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            let l = model.l_operator(&env.ctx);
            // The vanishing order m = n+1 is cheap at rank <= 2; at rank 3
            // the diff-ring chain over a 27-dimensional quantum space is
            // desk-scale prohibitive, and the m > n case is already
            // covered by the quantum flavor and by rank 2.
            let depth = if env.cfg.n <= 2 { env.cfg.n + 1 } else { env.cfg.n };
            gaudin::newton_classical_residual(&env.ctx, &l, depth, env.policy, tol, id)
        }),
    );
    add(
        "power-traces:commute".into(),
        "power-traces",
        Suite::Newton,
        1e-8,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            let l = model.l_operator(&env.ctx);
            gaudin::power_trace_commutativity(
                &env.ctx,
                &l,
                2,
                (C64::new(0.22, 0.04), C64::new(-0.13, 0.07)),
                env.policy,
                tol,
                id,
            )
        }),
    );

    // ---- gaudin ----------------------------------------------------
    add(
        format!("rLL:sites:n={n}"),
        "DrLL",
        Suite::Gaudin,
        1e-9,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::rll_classical_residual(&env.ctx, &model.l_operator(&env.ctx), env.policy, tol, id)
        }),
    );
    add(
        format!("EhL-G:sites:n={n}"),
        "EhL_LEh_G",
        Suite::Gaudin,
        1e-10,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::ehl_classical_residual(&env.ctx, &model.l_operator(&env.ctx), env.policy, tol, id)
        }),
    );
    add(
        format!("hs_sh:n={n}"),
        "hs_sh",
        Suite::Gaudin,
        1e-10,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::cartan_residual_s(&env.ctx, &model.l_operator(&env.ctx), env.policy, tol, id)
        }),
    );
    add(
        format!("s-weight-blocks:n={n}"),
        "hs_sh",
        Suite::Gaudin,
        1e-10,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::weight_block_residual(&env.ctx, &model.l_operator(&env.ctx), env.policy, tol, id)
        }),
    );
    add(
        format!("ss_ss:n={n}"),
        "ss_ss",
        Suite::Gaudin,
        1e-8,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::commutativity_on_zero_weight(
                &env.ctx,
                &model.l_operator(&env.ctx),
                &ss_pairs(env.cfg.n),
                &uv_pairs(env.cfg.n),
                env.policy,
                tol,
                id,
            )
        }),
    );
    add(
        format!("Q_Ltilde:n={n}"),
        "Q_Ltilde",
        Suite::Gaudin,
        1e-8,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            gaudin::twisted_gaudin_residual(&env.ctx, &model, env.policy, tol, id)
        }),
    );
    add(
        format!("gaudin-limit:n={n}"),
        "LqLc",
        Suite::Gaudin,
        1e-5,
        Box::new(|env, id, tol| {
            gaudin::classical_limit_residual(
                &env.ctx,
                env.cfg.sites[0].1,
                &[1e-2, 5e-3, 2.5e-3],
                env.policy,
                tol,
                id,
            )
        }),
    );
    add(
        "half-current:residue".into(),
        "hc_eij_N",
        Suite::Gaudin,
        1e-2,
        Box::new(|env, id, tol| {
            let model = resolve_model(env)?;
            // The diagonal current has the same simple pole at rank 1.
            let j = if env.cfg.n == 1 { 0 } else { 1 };
            gaudin::half_current_residue_residual(&env.ctx, &model, 0, j, env.policy, tol, id)
        }),
    );

    // ---- sl2 (always the gl_2 engine on its own sites) --------------
    let sl2_ctx = |env: &RunEnv| -> dynell_core::Result<Ctx> {
        Ctx::new(2, env.ctx.ell, env.ctx.hbar)
    };
    let sl2_sites2 = [C64::new(0.1, 0.0), C64::new(0.45, 0.0)];
    let sl2_sites4 = [
        C64::new(0.1, 0.0),
        C64::new(0.45, 0.0),
        C64::new(-0.21, 0.0),
        C64::new(0.3, 0.2),
    ];
    add(
        "sl2:current-commutation".into(),
        "sl2-currents",
        Suite::Sl2,
        1e-10,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::ef_commutation_residual(&ctx, &sl2::sl2_model(&sl2_sites2)?, env.policy, tol, id)
        }),
    );
    add(
        "sl2:S-forms:N=2".into(),
        "S_lambda",
        Suite::Sl2,
        1e-9,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::s_forms_residual(&ctx, &sl2::sl2_model(&sl2_sites2)?, env.policy, tol, id)
        }),
    );
    add(
        "sl2:S-commute:N=2".into(),
        "S_lambda",
        Suite::Sl2,
        1e-8,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::s_commutativity_residual(
                &ctx,
                &sl2::sl2_model(&sl2_sites2)?,
                (C64::new(0.21, 0.04), C64::new(-0.17, 0.08)),
                env.policy,
                tol,
                id,
            )
        }),
    );
    add(
        "sl2:S-commute:N=4".into(),
        "S_lambda",
        Suite::Sl2,
        1e-8,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::s_commutativity_residual(
                &ctx,
                &sl2::sl2_model(&sl2_sites4)?,
                (C64::new(0.21, 0.04), C64::new(-0.17, 0.08)),
                env.policy,
                tol,
                id,
            )
        }),
    );
    add(
        "sl2:pipeline:N=2".into(),
        "chpolGaudin-sl2",
        Suite::Sl2,
        1e-8,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::pipeline_crosscheck_residual(&ctx, &sl2::sl2_model(&sl2_sites2)?, env.policy, tol, id)
        }),
    );
    add(
        "sl2:pipeline:N=4".into(),
        "chpolGaudin-sl2",
        Suite::Sl2,
        1e-8,
        Box::new(move |env, id, tol| {
            let ctx = sl2_ctx(env)?;
            sl2::pipeline_crosscheck_residual(&ctx, &sl2::sl2_model(&sl2_sites4)?, env.policy, tol, id)
        }),
    );

    // ---- trig ------------------------------------------------------
    add(
        format!("trig:DYBE:n={n}"),
        "RtrigD",
        Suite::Trig,
        1e-9,
        Box::new(|env, id, tol| {
            felder::dybe_residual(&env.ctx, RKind::TrigDynamical, env.policy, tol, id)
        }),
    );
    add(
        format!("trig:tau-limit:n={n}"),
        "RtrigD",
        Suite::Trig,
        1e-6,
        Box::new(|env, id, tol| felder::trig_limit_gap(&env.ctx, 8.0, env.policy, tol, id)),
    );
    add(
        format!("trig:tau-limit-trend:n={n}"),
        "RtrigD",
        Suite::Trig,
        1.0,
        Box::new(|env, id, tol| {
            // Growth factor of the limit gap from Im tau = 6 to 8; must
            // not exceed 1 (residuals below 1e-12 count as converged).
            let g6 = felder::trig_limit_gap(&env.ctx, 6.0, env.policy, tol, id)?;
            let g8 = felder::trig_limit_gap(&env.ctx, 8.0, env.policy, tol, id)?;
            let mut rep = ResidualReport::new(id, "RtrigD", tol, env.policy.seed);
            rep.samples_used = g6.samples_used + g8.samples_used;
            rep.max_abs = g8.max_abs;
            rep.max_rel = g8.max_rel / g6.max_rel.max(1e-12);
            rep.pass = rep.max_rel < tol;
            Ok(rep)
        }),
    );
    add(
        format!("trig:F-conjugation:n={n}"),
        "Rtildetrig",
        Suite::Trig,
        1e-12,
        Box::new(|env, id, tol| {
            felder::trig_f_conjugation_residual(&env.ctx, env.policy, tol, id)
        }),
    );
    add(
        format!("trig:manin:n={n}"),
        "Rtrig",
        Suite::Trig,
        1e-9,
        Box::new(|env, id, tol| {
            let body = lops::trig_lop_body(&env.ctx, RKind::TrigNonDynamical);
            let m = lops::trig_manin(&env.ctx, &body)?;
            merged_manin(env, id, tol, &m, "Rtrig")
        }),
    );
    add(
        format!("trig:manin-GLG:n={n}"),
        "Rtildetrig",
        Suite::Trig,
        1e-9,
        Box::new(|env, id, tol| {
            let body = lops::twisted_trig_body(&env.ctx)?;
            let m = lops::trig_manin(&env.ctx, &body)?;
            merged_manin(env, id, tol, &m, "Rtildetrig")
        }),
    );
    add(
        format!("trig:nondyn-limit:n={n}"),
        "Rtrig",
        Suite::Trig,
        1e-4,
        Box::new(|env, id, tol| {
            felder::trig_nondyn_limit_residual(&env.ctx, 6.0, env.policy, tol, id)
        }),
    );

    checks
}

/// Outcome of a full run.
pub struct RunOutcome {
    pub reports: Vec<ResidualReport>,
    pub passed: usize,
    pub failed: usize,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let env = RunEnv { cfg: cfg.clone(), ctx: cfg.ctx()?, policy: cfg.policy() };
    let mut reports: Vec<ResidualReport> = catalogue(cfg)
        .into_iter()
        .filter(|c| cfg.suites.contains(&c.suite))
        .map(|c| c.execute(&env))
        .collect();
    reports.sort_by(|a, b| a.identity_id.cmp(&b.identity_id));
    let passed = reports.iter().filter(|r| r.pass && r.status == "ok").count();
    let failed = reports.len() - passed;
    Ok(RunOutcome { reports, passed, failed })
}
