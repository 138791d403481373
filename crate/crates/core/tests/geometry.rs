use qrepsim::engine::presets::{berlin, madrid, new_york};
use qrepsim::geometry::*;
use qrepsim::orbit::*;

#[test]
fn slant_range_by_law_of_cosines() {
    // independent: solve |site + L u|^2 = a^2 with elevation angle between u
    // and the local vertical complement
    let a = R_EARTH + 500.0;
    for theta in [20.0f64, 45.0, 90.0] {
        let th = theta.to_radians();
        let b = 2.0 * R_EARTH * th.sin();
        let c = R_EARTH * R_EARTH - a * a;
        let l = (-b + (b * b - 4.0 * c).sqrt()) / 2.0;
        let g = overhead_pass_geometry(500.0, theta);
        assert!((g.slant_range - l).abs() < 1e-9, "{theta}: {} vs {l}", g.slant_range);
    }
    assert!((overhead_pass_geometry(500.0, 20.0).slant_range - 1193.0).abs() < 1.0);
    assert!((overhead_pass_geometry(500.0, 90.0).slant_range - 500.0).abs() < 1e-9);
}

#[test]
fn station_separations() {
    // published figures: 57.6 deg and 6385 km; 1870 km
    let ic = angular_separation_gs(&new_york(), &berlin(), EarthShape::Wgs84);
    assert!((ic - 57.6).abs() < 0.1, "{ic}");
    let ic_km = surface_distance_km(&new_york(), &berlin(), EarthShape::Sphere);
    assert!((ic_km - 6385.0).abs() < 10.0, "{ic_km}");
    let eu = angular_separation_gs(&madrid(), &berlin(), EarthShape::Wgs84);
    assert!((eu - 16.8).abs() < 0.1, "{eu}");
    let eu_km = surface_distance_km(&madrid(), &berlin(), EarthShape::Sphere);
    assert!((eu_km - 1870.0).abs() < 10.0, "{eu_km}");
}

#[test]
fn line_of_sight_across_the_earth() {
    let a = R_EARTH + 500.0;
    let p = Vec3::new(a, 0.0, 0.0);
    assert!(!line_of_sight(&p, &-p, 20.0));
    let half = |deg: f64| Vec3::new(a * deg.to_radians().cos(), a * deg.to_radians().sin(), 0.0);
    // chord midpoint radius a cos(phi/2) must exceed R_E + 20
    let limit = 2.0 * ((R_EARTH + 20.0) / a).acos().to_degrees();
    assert!(line_of_sight(&p, &half(limit - 0.1), 20.0));
    assert!(!line_of_sight(&p, &half(limit + 0.1), 20.0));
    assert!(line_of_sight(&p, &p, 20.0));
}

#[test]
fn topocentric_of_overhead_satellite() {
    let clock = EpochClock::new(chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap());
    let gs = GroundStation::new("x", 30.0, 40.0);
    let site = site_state(&gs, &clock, 0.0, EarthShape::Wgs84);
    let sat = StateVector::new(site.pos + 600.0 * site.up, site.vel, 0.0);
    let t = topocentric(&site, &sat);
    assert!((t.elevation - 90.0).abs() < 1e-9);
    assert!((t.slant_range - 600.0).abs() < 1e-9);
    assert!(t.los_rate.abs() < 1e-12);
}

#[test]
fn passes_found_from_a_propagated_orbit() {
    let g = GravityModel::j2();
    let clock = qrepsim::engine::presets::initial_epoch();
    let el = KeplerElements::circular(500.0, 97.4, 68.5, 308.0);
    let s0 = kepler_to_cartesian(&el, &g).unwrap();
    let traj = propagate(&s0, &g, 86_400.0, 5.0).unwrap();
    let w = find_passes(&traj, &new_york(), &clock, EarthShape::Wgs84, 20.0, 0);
    assert!(!w.is_empty());
    for p in &w {
        assert!(p.duration() > 0.0 && p.duration() < 400.0);
        assert!(p.max_elevation >= 20.0);
        assert_eq!(p.station, "New York City");
    }
}
