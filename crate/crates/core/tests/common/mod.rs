//! Property runners shared by the `properties` and `acceptance` targets.
//! Each runner draws `cases` inputs from a fixed-seed generator and returns
//! the first counterexample, if any.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use qrepsim::channel::*;
use qrepsim::engine::presets::*;
use qrepsim::engine::*;
use qrepsim::geometry::{line_of_sight, overhead_pass_geometry};
use qrepsim::oracle::{run_oracle, OracleConfig};
use qrepsim::orbit::*;
use qrepsim::swap::*;

pub type Property = fn(u32) -> Result<(), String>;

pub const ALL: [(&str, Property); 12] = [
    ("rate orderings", rate_orderings),
    ("monotone in efficiency and cutoff", monotonicity),
    ("exchange symmetry", exchange_symmetry),
    ("efficiency bounds", efficiency_bounds),
    ("gating soundness", gating_soundness),
    ("time-step halving", step_halving),
    ("element round trip", element_round_trip),
    ("line-of-sight symmetry", los_symmetry),
    ("config round trip", config_round_trip),
    ("timeseries round trip", csv_round_trip),
    ("oracle determinism", oracle_determinism),
    ("closed form vs truncated sum", closed_form_vs_sum),
];

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&s, f).map_err(|e| e.to_string())
}

fn memory() -> impl Strategy<Value = BinMemory> {
    (1e1f64..1e8, 1e1f64..1e8, 0.01f64..=1.0, 0.0f64..=1.0).prop_map(|(tau, coh, ret, plus)| BinMemory {
        ln_p: -1.0 / tau,
        ln_coh: -1.0 / coh,
        eta_ret: ret,
        eta_plus: plus,
    })
}

fn log_eta() -> impl Strategy<Value = f64> {
    (-8.0f64..0.0).prop_map(|x| 10f64.powf(x))
}

fn link_state() -> impl Strategy<Value = LinkState> {
    (log_eta(), log_eta(), 0u64..5000, 0u64..5000, 0u64..1_000_000, 0u64..1_000_000).prop_map(
        |(eta_a, eta_b, d_rt_a, d_rt_b, d_cut_a, d_cut_b)| LinkState { eta_a, eta_b, d_rt_a, d_rt_b, d_cut_a, d_cut_b },
    )
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

pub fn rate_orderings(cases: u32) -> Result<(), String> {
    check(cases, (link_state(), memory(), memory()), |(s, ma, mb)| {
        let r = bsm_rates(&s, &ma, &mb);
        prop_assert!(r.attempted >= r.successful && r.successful >= r.correct);
        prop_assert!(r.correct >= r.erroneous && r.erroneous >= 0.0);
        prop_assert!(r.attempted <= 1.0);
        prop_assert!(close(r.correct + r.erroneous, r.successful, 1e-12));
        prop_assert!(r.secure >= 0.0 && r.secure <= r.successful);
        prop_assert!((0.0..=0.5).contains(&r.qber_x));
        Ok(())
    })
}

pub fn monotonicity(cases: u32) -> Result<(), String> {
    check(cases, (link_state(), memory(), 1.0f64..10.0, 1u64..100_000), |(s, m, k, extra)| {
        let base = bsm_rates(&s, &m, &m);
        let more_eta = LinkState { eta_a: (s.eta_a * k).min(1.0), ..s };
        prop_assert!(bsm_rates(&more_eta, &m, &m).attempted >= base.attempted * (1.0 - 1e-12));
        let more_cut = LinkState { d_cut_a: s.d_cut_a + extra, ..s };
        prop_assert!(bsm_rates(&more_cut, &m, &m).attempted >= base.attempted * (1.0 - 1e-12));
        // a longer round trip only adds memory decay
        let longer = LinkState { d_rt_a: s.d_rt_a + extra, ..s };
        let l = bsm_rates(&longer, &m, &m);
        prop_assert!(close(l.attempted, base.attempted, 1e-12));
        prop_assert!(l.successful <= base.successful * (1.0 + 1e-12));
        Ok(())
    })
}

pub fn exchange_symmetry(cases: u32) -> Result<(), String> {
    check(cases, (link_state(), memory(), memory()), |(s, ma, mb)| {
        let r = bsm_rates(&s, &ma, &mb);
        let q = bsm_rates(&s.swapped(), &mb, &ma);
        for (x, y) in [(r.attempted, q.attempted), (r.successful, q.successful), (r.correct, q.correct), (r.erroneous, q.erroneous)] {
            prop_assert!(close(x, y, 1e-12), "{} vs {}", x, y);
        }
        Ok(())
    })
}

pub fn efficiency_bounds(cases: u32) -> Result<(), String> {
    let s = (0.5f64..=90.0, 200.0f64..2000.0, 0.2f64..2.0, 0.1f64..1.0, 800.0f64..1600.0, 0.05f64..=1.0, 10.0f64..10_000.0);
    check(cases, s, |(theta, alt, d_gs, d_sat, nm, eta_zen, l_is)| {
        let ground = OpticalTerminal { aperture_diameter_m: d_gs, wavelength_m: nm * 1e-9, ..OpticalTerminal::ground_station() };
        let sat = OpticalTerminal { aperture_diameter_m: d_sat, wavelength_m: nm * 1e-9, ..OpticalTerminal::satellite() };
        let m = LinkModel::new(ground, sat, TurbulenceProfile::hv10_10(), WindModel::default(), AoConfig::default(), eta_zen).unwrap();
        let g = overhead_pass_geometry(alt, theta);
        for c in [m.downlink(&g).unwrap(), m.uplink(&g).unwrap(), m.intersat(l_is)] {
            for x in [c.eta_coll, c.eta_atm, c.eta_smf, c.eta_ao, c.eta_bwb, c.eta_0, c.eta_total] {
                prop_assert!((0.0..=1.0).contains(&x), "{:?}", c);
            }
        }
        Ok(())
    })
}

pub fn gating_soundness(cases: u32) -> Result<(), String> {
    let s = (any::<bool>(), any::<bool>(), 0.2f64..1.4, 400.0f64..1200.0, -10.0f64..10.0, -600.0f64..600.0, 10.0f64..40.0);
    check(cases, s, |(ul, eu, ratio, alt, dl, t0, theta_min)| {
        let base = if eu { eu_zenith() } else { ic_zenith(Architecture::Downlink) };
        let sc = Scenario {
            architecture: if ul { Architecture::Uplink } else { Architecture::Downlink },
            constellation: ConstellationSpec::Aligned { altitude_km: alt, ratio, alignment_s: 0.0 },
            delta_lambda_deg: dl,
            theta_min_deg: theta_min,
            step_s: 20.0,
            ..base
        };
        let res = simulate_window(&sc, t0, 200.0).unwrap();
        for r in &res.records {
            let open = r.theta_a >= theta_min && r.theta_b >= theta_min && r.los_a && r.los_b;
            if !open {
                prop_assert!(!r.linked && r.rates == BsmRates::default());
            } else {
                prop_assert!(r.linked && r.eta_a > 0.0 && r.eta_a <= 1.0 && r.eta_b > 0.0 && r.eta_b <= 1.0);
            }
        }
        Ok(())
    })
}

pub fn step_halving(cases: u32) -> Result<(), String> {
    let s = (any::<bool>(), 0.8f64..1.2, 450.0f64..700.0, -3.0f64..3.0);
    check(cases, s, |(ul, ratio, alt, dl)| {
        let sc = Scenario {
            architecture: if ul { Architecture::Uplink } else { Architecture::Downlink },
            constellation: ConstellationSpec::Aligned { altitude_km: alt, ratio, alignment_s: 0.0 },
            delta_lambda_deg: dl,
            ..ic_zenith(Architecture::Downlink)
        };
        let total = |step: f64| {
            simulate_pass(&Scenario { step_s: step, ..sc.clone() }, 400.0).unwrap().summary.map(|s| s.totals.secure).unwrap_or(0.0)
        };
        let (a, b) = (total(2.0), total(1.0));
        prop_assume!(b > 1.0);
        prop_assert!((a - b).abs() < 0.01 * b, "{} vs {}", a, b);
        Ok(())
    })
}

pub fn element_round_trip(cases: u32) -> Result<(), String> {
    let s = (6700.0f64..9000.0, 1e-3f64..0.2, 1.0f64..179.0, 0.0f64..360.0, 0.0f64..360.0, 0.0f64..360.0);
    check(cases, s, |(a, e, i, raan, argp, nu)| {
        let g = GravityModel::j2();
        let el = KeplerElements { a, e, i, raan, argp, true_anomaly: nu };
        prop_assume!(el.validate().is_ok());
        let sv = kepler_to_cartesian(&el, &g).unwrap();
        let back = kepler_to_cartesian(&cartesian_to_kepler(&sv, &g).unwrap(), &g).unwrap();
        prop_assert!((back.r - sv.r).norm() < 1e-6 && (back.v - sv.v).norm() < 1e-9);
        Ok(())
    })
}

pub fn los_symmetry(cases: u32) -> Result<(), String> {
    let v = || (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 6400.0f64..42_000.0);
    check(cases, (v(), v(), 0.0f64..100.0), |((ax, ay, az, ra), (bx, by, bz, rb), h)| {
        let (a, b) = (Vec3::new(ax, ay, az), Vec3::new(bx, by, bz));
        prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
        let (a, b) = (a.normalize() * ra, b.normalize() * rb);
        prop_assert_eq!(line_of_sight(&a, &b, h), line_of_sight(&b, &a, h));
        // blocked at a lower grazing height implies blocked higher up
        if !line_of_sight(&a, &b, h) {
            prop_assert!(!line_of_sight(&a, &b, h + 1.0));
        }
        Ok(())
    })
}

pub fn config_round_trip(cases: u32) -> Result<(), String> {
    let s = (300.0f64..2000.0, 0.05f64..2.0, 1.0f64..60.0, 0.01f64..=1.0, 0.1f64..10.0, any::<bool>());
    check(cases, s, |(alt, ratio, theta, ret, step, ul)| {
        let src = format!(
            "architecture = \"{}\"\n[run]\nstep_s = {step:?}\n[stations]\nalice = {{ lat_deg = 40.0, lon_deg = -3.0 }}\n\
             bob = {{ lat_deg = 52.5, lon_deg = 13.4 }}\n[constellation]\nkind = \"aligned\"\naltitude_km = {alt:?}\n\
             ratio = {ratio:?}\n[link]\ntheta_min_deg = {theta:?}\n[repeater.memory]\neta_ret = {ret:?}\n",
            if ul { "ul" } else { "dl" }
        );
        let cfg = qrepsim::config::parse_str(&src).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let sc = &cfg.scenario;
        prop_assert_eq!(&sc.constellation, &ConstellationSpec::Aligned { altitude_km: alt, ratio, alignment_s: 0.0 });
        prop_assert_eq!(sc.theta_min_deg, theta);
        prop_assert_eq!(sc.memory_a.eta_ret, ret);
        prop_assert_eq!(sc.memory_b.eta_ret, ret);
        prop_assert_eq!(sc.step_s, step);
        prop_assert_eq!(sc.architecture, if ul { Architecture::Uplink } else { Architecture::Downlink });
        Ok(())
    })
}

pub fn csv_round_trip(cases: u32) -> Result<(), String> {
    let f = || -1e6f64..1e6;
    check(cases, (f(), f(), f(), f(), log_eta(), log_eta(), any::<u64>(), any::<bool>(), any::<bool>()), |(t, th, l, r, ea, eb, cut, linked, night)| {
        let is = ChannelSample { eta_total: ea, ..Default::default() };
        let rec = StepRecord {
            t,
            theta_a: th,
            theta_b: -th,
            l_a: l,
            l_b: l / 3.0,
            l_is_a: r,
            l_is_b: r * 0.7,
            los_a: true,
            los_b: true,
            linked,
            ground_a: linked.then_some(is),
            ground_b: linked.then_some(is),
            is_a: linked.then_some(is),
            is_b: linked.then_some(is),
            eta_a: ea,
            eta_b: eb,
            trt_a_s: ea * 0.01,
            trt_b_s: eb * 0.01,
            d_cut_a: cut,
            d_cut_b: cut / 7,
            rates: BsmRates { attempted: r.abs(), successful: ea, correct: eb, erroneous: 0.0, secure: ea * eb, qber_x: 0.1 },
            night,
        };
        let row = qrepsim::output::timeseries_row(&rec);
        prop_assert_eq!(row.len(), qrepsim::output::TIMESERIES_COLUMNS.len());
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        prop_assert_eq!(num(0), t);
        prop_assert_eq!(num(1), th);
        prop_assert_eq!(num(3), l);
        prop_assert_eq!(num(10), ea);
        prop_assert_eq!(num(11), eb);
        prop_assert_eq!(row[14].parse::<u64>().unwrap(), cut);
        prop_assert_eq!(num(19), ea * eb);
        prop_assert_eq!(row[21].as_str(), if night { "1" } else { "0" });
        prop_assert_eq!(row[7].is_empty(), !linked);
        if linked {
            prop_assert_eq!(num(7), to_db(ea));
        }
        Ok(())
    })
}

pub fn oracle_determinism(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 0.01f64..0.5, 0.01f64..0.5, 0u64..50, 0u64..50, memory()), |(seed, ea, eb, rt, cut, m)| {
        let link = LinkState { eta_a: ea, eta_b: eb, d_rt_a: rt, d_rt_b: rt + 1, d_cut_a: cut, d_cut_b: cut + 2 };
        let cfg = OracleConfig::new(5_000, seed, link, m, m);
        let (x, y) = (run_oracle(&cfg), run_oracle(&cfg));
        prop_assert_eq!(x, y);
        prop_assert_eq!(x.successful, x.correct + x.erroneous);
        prop_assert!(x.attempted >= x.successful);
        Ok(())
    })
}

/// The geometric sums against direct summation for short cutoffs.
pub fn closed_form_vs_sum(cases: u32) -> Result<(), String> {
    check(cases, (-2.0f64..0.0, 0u64..200), |(ln_x, d)| {
        let direct: f64 = (0..d).map(|k| (ln_x * k as f64).exp()).sum();
        prop_assert!(close(geometric_sum(ln_x, d), direct, 1e-12));
        Ok(())
    })
}
