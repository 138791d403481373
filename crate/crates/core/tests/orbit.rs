use approx::assert_relative_eq;
use chrono::NaiveDate;
use qrepsim::orbit::*;

fn utc(y: i32, mo: u32, d: u32, h: u32, mi: u32) -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(y, mo, d).unwrap().and_hms_opt(h, mi, 0).unwrap()
}

#[test]
fn keplerian_circle_closes_after_one_period() {
    let g = GravityModel::keplerian();
    let el = KeplerElements::circular(500.0, 56.7, 28.1, 317.0);
    let a = R_EARTH + 500.0;
    let t_orbit = 2.0 * std::f64::consts::PI * (a.powi(3) / MU_EARTH).sqrt();
    assert_relative_eq!(el.period(MU_EARTH), t_orbit, max_relative = 1e-14);
    assert!((t_orbit - 5676.98).abs() < 0.01);
    let s0 = kepler_to_cartesian(&el, &g).unwrap();
    let s1 = advance(&s0, &g, t_orbit, 1.0).unwrap();
    assert!((s1.r - s0.r).norm() < 1e-3, "miss {} km", (s1.r - s0.r).norm());
    assert_relative_eq!(s1.specific_energy(MU_EARTH), s0.specific_energy(MU_EARTH), max_relative = 1e-10);
}

#[test]
fn elements_round_trip() {
    let g = GravityModel::j2();
    let el = KeplerElements { a: 7000.0, e: 0.01, i: 97.4, raan: 68.5, argp: 30.0, true_anomaly: 200.0 };
    let back = cartesian_to_kepler(&kepler_to_cartesian(&el, &g).unwrap(), &g).unwrap();
    assert_relative_eq!(back.a, el.a, max_relative = 1e-12);
    assert_relative_eq!(back.e, el.e, max_relative = 1e-9);
    for (x, y) in [(back.i, el.i), (back.raan, el.raan), (back.argp, el.argp), (back.true_anomaly, el.true_anomaly)] {
        assert!((x - y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn invalid_elements_are_rejected() {
    let g = GravityModel::j2();
    let mut el = KeplerElements::circular(500.0, 50.0, 0.0, 0.0);
    el.e = 1.5;
    assert!(matches!(kepler_to_cartesian(&el, &g), Err(OrbitError::NotElliptic(_))));
    let low = KeplerElements { a: 6000.0, ..KeplerElements::circular(500.0, 50.0, 0.0, 0.0) };
    assert!(low.validate().is_err());
}

#[test]
fn forward_then_backward_returns_home() {
    let g = GravityModel::j2();
    let s0 = kepler_to_cartesian(&KeplerElements::circular(700.0, 40.0, 10.0, 20.0), &g).unwrap();
    let s1 = advance(&s0, &g, 3000.0, 1.0).unwrap();
    let s2 = advance(&s1, &g, 0.0, 1.0).unwrap();
    assert!((s2.r - s0.r).norm() < 1e-6);
}

#[test]
fn j2_raan_drift_of_sun_synchronous_orbit() {
    let g = GravityModel::j2();
    let el = KeplerElements::circular(500.0, 97.4055, 68.5, 0.0);
    // first-order secular rate, written out independently
    let a = el.a;
    let n = (MU_EARTH / a.powi(3)).sqrt();
    let oracle = -1.5 * n * J2_EARTH * (R_EARTH / a).powi(2) * el.i.to_radians().cos();
    let (raan_dot, _) = g.secular_rates(&el);
    assert_relative_eq!(raan_dot, oracle, max_relative = 1e-12);
    let per_day = oracle.to_degrees() * 86_400.0;
    assert!((per_day - 0.9856).abs() < 0.02 * 0.9856, "{per_day}");
}

#[test]
fn gmst_at_j2000() {
    // 2000-01-01 12:00 UT: 280.46061837 deg
    let jd = julian_date(&utc(2000, 1, 1, 12, 0));
    assert_eq!(jd, 2_451_545.0);
    assert!((gmst_from_jd(jd).to_degrees() - 280.460_618_37).abs() < 1e-6);
}

#[test]
fn earth_rotates_once_per_sidereal_day() {
    let c = EpochClock::new(utc(2020, 1, 1, 2, 0));
    let sidereal = std::f64::consts::TAU / OMEGA_EARTH;
    let d = (c.gmst(sidereal) - c.gmst(0.0)).abs();
    assert!(d < 1e-9 || (d - std::f64::consts::TAU).abs() < 1e-9);
}

#[test]
fn sun_declination_at_equinox_and_solstice() {
    let eq = EpochClock::new(utc(2020, 3, 20, 3, 50));
    assert!(sun_direction(&eq, 0.0).z.asin().to_degrees().abs() < 0.05);
    let sol = EpochClock::new(utc(2020, 6, 20, 21, 44));
    assert!((sun_direction(&sol, 0.0).z.asin().to_degrees() - 23.44).abs() < 0.05);
}

#[test]
fn berlin_is_dark_on_a_winter_night_and_light_at_noon() {
    let berlin = GroundStation::new("Berlin", 52.52, 13.405);
    let c = EpochClock::new(utc(2020, 1, 1, 2, 0));
    assert!(is_night(&berlin, &c, 0.0, -6.0, EarthShape::Wgs84));
    assert!(!is_night(&berlin, &c, 10.0 * 3600.0, -6.0, EarthShape::Wgs84));
}

#[test]
fn wgs84_station_positions() {
    let (p, up) = GroundStation::new("eq", 0.0, 0.0).ecef(EarthShape::Wgs84);
    assert_relative_eq!(p.x, R_EARTH, max_relative = 1e-15);
    assert_relative_eq!(up.x, 1.0);
    let (p, _) = GroundStation::new("pole", 90.0, 0.0).ecef(EarthShape::Wgs84);
    assert!((p.z - 6356.752_314).abs() < 1e-5);
    let (p, _) = GroundStation::new("s", 45.0, 30.0).ecef(EarthShape::Sphere);
    assert_relative_eq!(p.norm(), R_EARTH, max_relative = 1e-15);
}

#[test]
fn sun_synchronous_raan_drift_over_ten_days() {
    let g = GravityModel::j2();
    let s0 = kepler_to_cartesian(&KeplerElements::circular(500.0, 97.4055, 68.5, 0.0), &g).unwrap();
    let traj = propagate(&s0, &g, 10.0 * 86_400.0, 10.0).unwrap();
    // least-squares slope of the osculating node against time
    let pts: Vec<(f64, f64)> = traj
        .iter()
        .step_by(6)
        .map(|s| (s.epoch / 86_400.0, cartesian_to_kepler(s, &g).unwrap().raan))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope - 0.9856).abs() < 0.02 * 0.9856, "{slope} deg/day");
}
