//! Topocentric geometry, inter-satellite visibility and pass extraction.

use crate::orbit::{site_state, EarthShape, EpochClock, GroundStation, SiteState, StateVector, Vec3, MU_EARTH, R_EARTH};

/// Mean Earth radius used for great-circle surface distances, km.
pub const R_EARTH_MEAN: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topocentric {
    /// deg
    pub elevation: f64,
    /// deg, clockwise from north
    pub azimuth: f64,
    /// km
    pub slant_range: f64,
    /// rad/s
    pub los_rate: f64,
}

pub fn topocentric(site: &SiteState, sat: &StateVector) -> Topocentric {
    let rho = sat.r - site.pos;
    let l = rho.norm();
    let rhat = rho / l;
    let up = site.up;
    let mut east = Vec3::z().cross(&up);
    if east.norm() < 1e-12 {
        east = Vec3::y();
    }
    let east = east.normalize();
    let north = up.cross(&east);
    let elevation = rhat.dot(&up).clamp(-1.0, 1.0).asin().to_degrees();
    let mut azimuth = rho.dot(&east).atan2(rho.dot(&north)).to_degrees().rem_euclid(360.0);
    if azimuth >= 360.0 {
        azimuth = 0.0;
    }
    let w = sat.v - site.vel;
    let transverse = w - w.dot(&rhat) * rhat;
    Topocentric { elevation, azimuth, slant_range: l, los_rate: transverse.norm() / l }
}

/// Geometry of a circular orbit at `altitude_km` seen at elevation `theta_deg`
/// from a station on a non-rotating spherical Earth, for a pass through zenith.
pub fn overhead_pass_geometry(altitude_km: f64, theta_deg: f64) -> Topocentric {
    let a = R_EARTH + altitude_km;
    let th = theta_deg.to_radians();
    let l = (a * a - (R_EARTH * th.cos()).powi(2)).sqrt() - R_EARTH * th.sin();
    let nadir = (R_EARTH * th.cos() / a).asin();
    let v = (MU_EARTH / a).sqrt();
    Topocentric { elevation: theta_deg, azimuth: 0.0, slant_range: l, los_rate: v * nadir.cos() / l }
}

/// Central angle between two stations, deg.
pub fn angular_separation_gs(a: &GroundStation, b: &GroundStation, shape: EarthShape) -> f64 {
    let (pa, _) = a.ecef(shape);
    let (pb, _) = b.ecef(shape);
    pa.cross(&pb).norm().atan2(pa.dot(&pb)).to_degrees()
}

/// Great-circle distance on the mean sphere, km.
pub fn surface_distance_km(a: &GroundStation, b: &GroundStation, shape: EarthShape) -> f64 {
    angular_separation_gs(a, b, shape).to_radians() * R_EARTH_MEAN
}

pub fn intersat_range(a: &StateVector, b: &StateVector) -> f64 {
    (a.r - b.r).norm()
}

/// True iff the segment a-b stays above `R_E + grazing_altitude`.
pub fn line_of_sight(p_a: &Vec3, p_b: &Vec3, grazing_altitude: f64) -> bool {
    let d = p_b - p_a;
    let dd = d.norm_squared();
    let t = if dd > 0.0 { (-p_a.dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (p_a + t * d).norm() > R_EARTH + grazing_altitude
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub max_elevation: f64,
    pub station: String,
    pub satellite: usize,
}

impl PassWindow {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

fn crossing(t0: f64, e0: f64, t1: f64, e1: f64, level: f64) -> f64 {
    if e1 == e0 {
        t0
    } else {
        t0 + (level - e0) / (e1 - e0) * (t1 - t0)
    }
}

/// Extracts windows with elevation >= `theta_min` from a sampled trajectory.
/// Boundaries are interpolated linearly in elevation.
pub fn find_passes(
    trajectory: &[StateVector],
    gs: &GroundStation,
    clock: &EpochClock,
    shape: EarthShape,
    theta_min: f64,
    satellite: usize,
) -> Vec<PassWindow> {
    let elev: Vec<(f64, f64)> = trajectory
        .iter()
        .map(|s| (s.epoch, topocentric(&site_state(gs, clock, s.epoch, shape), s).elevation))
        .collect();
    windows_from_samples(&elev, theta_min)
        .into_iter()
        .map(|(t_start, t_end, max_elevation)| PassWindow {
            t_start,
            t_end,
            max_elevation,
            station: gs.name.clone(),
            satellite,
        })
        .collect()
}

/// (start, end, max) for runs of samples at or above `level`.
pub fn windows_from_samples(samples: &[(f64, f64)], level: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for (k, &(t, e)) in samples.iter().enumerate() {
        let above = e >= level;
        match (open, above) {
            (None, true) => {
                let start = if k == 0 {
                    t
                } else {
                    let (tp, ep) = samples[k - 1];
                    crossing(tp, ep, t, e, level)
                };
                open = Some((start, e));
            }
            (Some((s, m)), true) => open = Some((s, m.max(e))),
            (Some((s, m)), false) => {
                let (tp, ep) = samples[k - 1];
                let end = crossing(tp, ep, t, e, level);
                if end > s {
                    out.push((s, end, m));
                }
                open = None;
            }
            (None, false) => {}
        }
    }
    if let Some((s, m)) = open {
        let end = samples.last().map(|x| x.0).unwrap_or(s);
        if end > s {
            out.push((s, end, m));
        }
    }
    out
}
