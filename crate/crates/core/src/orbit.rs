//! Orbit propagation under a zonal gravity field, Earth rotation and a
//! low-precision solar ephemeris.
//!
//! All positions live in one Earth-centred inertial frame whose x axis points
//! to the vernal equinox of the scenario epoch. Precession and nutation are
//! ignored.

use chrono::NaiveDateTime;
use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 398_600.441_8;
/// Equatorial radius, km.
pub const R_EARTH: f64 = 6378.137;
pub const J2_EARTH: f64 = 1.082_63e-3;
/// Sidereal rotation rate, rad/s.
pub const OMEGA_EARTH: f64 = 7.292_115_9e-5;
/// WGS84 flattening.
pub const WGS84_FLATTENING: f64 = 1.0 / 298.257_223_563;

const JD_UNIX_EPOCH: f64 = 2_440_587.5;
const JD_J2000: f64 = 2_451_545.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("eccentricity {0} is not elliptic (0 <= e < 1 required)")]
    NotElliptic(f64),
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),
    #[error("degenerate state vector: {0}")]
    Degenerate(&'static str),
    #[error("satellite impacts the Earth at t = {t:.1} s (|r| = {r:.1} km)")]
    Impact { t: f64, r: f64 },
    #[error("invalid propagation request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerElements {
    /// Semi-major axis, km.
    pub a: f64,
    pub e: f64,
    /// Inclination, deg.
    pub i: f64,
    /// Right ascension of the ascending node, deg.
    pub raan: f64,
    /// Argument of perigee, deg.
    pub argp: f64,
    /// True anomaly, deg.
    pub true_anomaly: f64,
}

impl KeplerElements {
    pub fn circular(altitude_km: f64, i: f64, raan: f64, arg_latitude: f64) -> Self {
        KeplerElements {
            a: R_EARTH + altitude_km,
            e: 0.0,
            i,
            raan: wrap_deg(raan),
            argp: 0.0,
            true_anomaly: wrap_deg(arg_latitude),
        }
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(0.0..1.0).contains(&self.e) {
            return Err(OrbitError::NotElliptic(self.e));
        }
        if !(self.a > R_EARTH) {
            return Err(OrbitError::InvalidElements(format!(
                "semi-major axis {} km is inside the Earth",
                self.a
            )));
        }
        if !(0.0..=180.0).contains(&self.i) {
            return Err(OrbitError::InvalidElements(format!(
                "inclination {} deg outside [0, 180]",
                self.i
            )));
        }
        for (name, v) in [
            ("raan", self.raan),
            ("argp", self.argp),
            ("true_anomaly", self.true_anomaly),
        ] {
            if !v.is_finite() {
                return Err(OrbitError::InvalidElements(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    pub fn period(&self, mu: f64) -> f64 {
        2.0 * std::f64::consts::PI * (self.a.powi(3) / mu).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub r: Vec3,
    pub v: Vec3,
    /// Seconds since the scenario epoch.
    pub epoch: f64,
}

impl StateVector {
    pub fn new(r: Vec3, v: Vec3, epoch: f64) -> Self {
        StateVector { r, v, epoch }
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * self.v.norm_squared() - mu / self.r.norm()
    }

    pub fn angular_momentum(&self) -> Vec3 {
        self.r.cross(&self.v)
    }
}

/// Zonal gravity field. `j[k]` holds J_{k+2}.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityModel {
    pub mu: f64,
    pub r_e: f64,
    pub j: Vec<f64>,
}

impl Default for GravityModel {
    fn default() -> Self {
        GravityModel::j2()
    }
}

impl GravityModel {
    pub fn keplerian() -> Self {
        GravityModel { mu: MU_EARTH, r_e: R_EARTH, j: Vec::new() }
    }

    pub fn j2() -> Self {
        GravityModel { mu: MU_EARTH, r_e: R_EARTH, j: vec![J2_EARTH] }
    }

    /// Highest zonal degree, 0 for a point mass.
    pub fn n_max(&self) -> usize {
        if self.j.is_empty() {
            0
        } else {
            self.j.len() + 1
        }
    }

    /// Gravitational potential (sign convention: a = -grad V).
    pub fn potential(&self, r: &Vec3) -> f64 {
        let rn = r.norm();
        let u = r.z / rn;
        let (p, _) = legendre(self.n_max(), u);
        let mut sum = 0.0;
        for (k, jn) in self.j.iter().enumerate() {
            let n = k + 2;
            sum += jn * (self.r_e / rn).powi(n as i32) * p[n];
        }
        -self.mu / rn * (1.0 - sum)
    }

    pub fn accel(&self, r: &Vec3) -> Vec3 {
        let rn2 = r.norm_squared();
        let rn = rn2.sqrt();
        let point = -self.mu / (rn2 * rn) * r;
        if self.j.is_empty() {
            return point;
        }
        let u = r.z / rn;
        // Legendre recurrence run inline to keep the hot path allocation-free
        let (mut p_prev, mut p_cur) = (1.0, u);
        let (mut dp_prev, mut dp_cur) = (0.0, 1.0);
        let q = self.r_e / rn;
        let mut ratio = q;
        let mut d_r = 0.0;
        let mut d_u = 0.0;
        for (idx, jn) in self.j.iter().enumerate() {
            let k = (idx + 1) as f64;
            let p_next = ((2.0 * k + 1.0) * u * p_cur - k * p_prev) / (k + 1.0);
            let dp_next = dp_prev + (2.0 * k + 1.0) * p_cur;
            p_prev = p_cur;
            p_cur = p_next;
            dp_prev = dp_cur;
            dp_cur = dp_next;
            ratio *= q;
            let n = (idx + 2) as f64;
            d_r += -self.mu * jn * (n + 1.0) * ratio * p_cur / rn2;
            d_u += self.mu / rn * jn * ratio * dp_cur;
        }
        let rhat = r / rn;
        let zhat = Vec3::z();
        point - (d_r * rhat + d_u / rn * (zhat - u * rhat))
    }

    /// First-order secular rates (rad/s) of RAAN and argument of perigee.
    pub fn secular_rates(&self, el: &KeplerElements) -> (f64, f64) {
        let j2 = self.j.first().copied().unwrap_or(0.0);
        let n = (self.mu / el.a.powi(3)).sqrt();
        let p = el.a * (1.0 - el.e * el.e);
        let k = 1.5 * n * j2 * (self.r_e / p).powi(2);
        let ci = el.i.to_radians().cos();
        let si = el.i.to_radians().sin();
        (-k * ci, k * (2.0 - 2.5 * si * si))
    }
}

/// Legendre polynomials P_0..P_n and their derivatives at u.
fn legendre(n: usize, u: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n.max(1) + 1];
    let mut dp = vec![0.0; n.max(1) + 1];
    p[0] = 1.0;
    p[1] = u;
    dp[1] = 1.0;
    for k in 1..n {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * u * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

pub fn wrap_deg(x: f64) -> f64 {
    let w = x.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

fn rot_pqw_to_eci(raan: f64, i: f64, argp: f64) -> [[f64; 3]; 3] {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    [
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ]
}

fn apply(m: &[[f64; 3]; 3], x: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * x.x + m[0][1] * x.y + m[0][2] * x.z,
        m[1][0] * x.x + m[1][1] * x.y + m[1][2] * x.z,
        m[2][0] * x.x + m[2][1] * x.y + m[2][2] * x.z,
    )
}

pub fn kepler_to_cartesian(el: &KeplerElements, g: &GravityModel) -> Result<StateVector, OrbitError> {
    el.validate()?;
    let p = el.a * (1.0 - el.e * el.e);
    let f = el.true_anomaly.to_radians();
    let (sf, cf) = f.sin_cos();
    let r = p / (1.0 + el.e * cf);
    let rp = Vec3::new(r * cf, r * sf, 0.0);
    let k = (g.mu / p).sqrt();
    let vp = Vec3::new(-k * sf, k * (el.e + cf), 0.0);
    let m = rot_pqw_to_eci(el.raan.to_radians(), el.i.to_radians(), el.argp.to_radians());
    Ok(StateVector::new(apply(&m, rp), apply(&m, vp), 0.0))
}

const CIRCULAR_TOL: f64 = 1e-11;
const EQUATORIAL_TOL: f64 = 1e-11;

fn angle_in_plane(from: &Vec3, to: &Vec3, hhat: &Vec3) -> f64 {
    from.cross(to).dot(hhat).atan2(from.dot(to))
}

pub fn cartesian_to_kepler(sv: &StateVector, g: &GravityModel) -> Result<KeplerElements, OrbitError> {
    let r = sv.r;
    let v = sv.v;
    let rn = r.norm();
    if !(rn > 0.0) {
        return Err(OrbitError::Degenerate("zero position"));
    }
    let h = r.cross(&v);
    let hn = h.norm();
    if hn <= 1e-12 * rn * v.norm().max(1e-300) {
        return Err(OrbitError::Degenerate("rectilinear orbit"));
    }
    let hhat = h / hn;
    let mu = g.mu;
    let e_vec = ((v.norm_squared() - mu / rn) * r - r.dot(&v) * v) / mu;
    let e = e_vec.norm();
    if e >= 1.0 {
        return Err(OrbitError::NotElliptic(e));
    }
    let a = 1.0 / (2.0 / rn - v.norm_squared() / mu);
    let i = hhat.z.clamp(-1.0, 1.0).acos();
    let node = Vec3::z().cross(&h);
    let nn = node.norm();
    let equatorial = nn <= EQUATORIAL_TOL * hn;
    let circular = e <= CIRCULAR_TOL;

    let (raan, argp, f) = match (equatorial, circular) {
        (false, false) => {
            let raan = node.y.atan2(node.x);
            (raan, angle_in_plane(&node, &e_vec, &hhat), angle_in_plane(&e_vec, &r, &hhat))
        }
        (false, true) => {
            let raan = node.y.atan2(node.x);
            (raan, 0.0, angle_in_plane(&node, &r, &hhat))
        }
        (true, false) => (0.0, angle_in_plane(&Vec3::x(), &e_vec, &hhat), angle_in_plane(&e_vec, &r, &hhat)),
        (true, true) => (0.0, 0.0, angle_in_plane(&Vec3::x(), &r, &hhat)),
    };
    Ok(KeplerElements {
        a,
        e,
        i: i.to_degrees(),
        raan: wrap_deg(raan.to_degrees()),
        argp: wrap_deg(argp.to_degrees()),
        true_anomaly: wrap_deg(f.to_degrees()),
    })
}

/// One classical Runge-Kutta step of size `h` (may be negative).
pub fn rk4_step(sv: &StateVector, g: &GravityModel, h: f64) -> StateVector {
    let (r0, v0) = (sv.r, sv.v);
    let a1 = g.accel(&r0);
    let r2 = r0 + 0.5 * h * v0;
    let v2 = v0 + 0.5 * h * a1;
    let a2 = g.accel(&r2);
    let r3 = r0 + 0.5 * h * v2;
    let v3 = v0 + 0.5 * h * a2;
    let a3 = g.accel(&r3);
    let r4 = r0 + h * v3;
    let v4 = v0 + h * a3;
    let a4 = g.accel(&r4);
    StateVector {
        r: r0 + h / 6.0 * (v0 + 2.0 * v2 + 2.0 * v3 + v4),
        v: v0 + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        epoch: sv.epoch + h,
    }
}

fn check_altitude(sv: &StateVector, g: &GravityModel) -> Result<(), OrbitError> {
    let rn = sv.r.norm();
    if rn < g.r_e {
        Err(OrbitError::Impact { t: sv.epoch, r: rn })
    } else {
        Ok(())
    }
}

/// Fixed-step RK4 from `sv.epoch` to `t_end`, sampled at every step. The last
/// step is shortened to land exactly on `t_end`.
pub fn propagate(sv: &StateVector, g: &GravityModel, t_end: f64, step: f64) -> Result<Vec<StateVector>, OrbitError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(OrbitError::BadRequest(format!("step must be positive, got {step}")));
    }
    if !(t_end > sv.epoch) {
        return Err(OrbitError::BadRequest(format!(
            "t_end {t_end} must lie after the state epoch {}",
            sv.epoch
        )));
    }
    let n_full = ((t_end - sv.epoch) / step * (1.0 + 1e-12)).floor() as usize;
    let mut out = Vec::with_capacity(n_full + 2);
    let mut s = *sv;
    check_altitude(&s, g)?;
    out.push(s);
    for k in 1..=n_full {
        s = rk4_step(&s, g, step);
        s.epoch = sv.epoch + k as f64 * step;
        check_altitude(&s, g)?;
        out.push(s);
    }
    let rest = t_end - s.epoch;
    if rest > 1e-9 * step {
        s = rk4_step(&s, g, rest);
        s.epoch = t_end;
        check_altitude(&s, g)?;
        out.push(s);
    }
    Ok(out)
}

/// Moves a state to epoch `t` with steps no longer than `max_step`.
pub fn advance(sv: &StateVector, g: &GravityModel, t: f64, max_step: f64) -> Result<StateVector, OrbitError> {
    let span = t - sv.epoch;
    if span == 0.0 {
        return Ok(*sv);
    }
    let n = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut s = *sv;
    for k in 1..=n {
        s = rk4_step(&s, g, h);
        s.epoch = sv.epoch + k as f64 * h;
        check_altitude(&s, g)?;
    }
    s.epoch = t;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EarthShape {
    Sphere,
    #[default]
    Wgs84,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation {
    pub name: String,
    /// Latitude, deg. Geocentric on a spherical Earth, geodetic on WGS84.
    pub lat: f64,
    /// Longitude, deg east.
    pub lon: f64,
}

impl GroundStation {
    pub fn new(name: &str, lat: f64, lon: f64) -> Self {
        GroundStation { name: name.to_string(), lat, lon }
    }

    /// Earth-fixed position (km) and outward unit normal.
    pub fn ecef(&self, shape: EarthShape) -> (Vec3, Vec3) {
        let (sp, cp) = self.lat.to_radians().sin_cos();
        let (sl, cl) = self.lon.to_radians().sin_cos();
        let up = Vec3::new(cp * cl, cp * sl, sp);
        match shape {
            EarthShape::Sphere => (R_EARTH * up, up),
            EarthShape::Wgs84 => {
                let e2 = WGS84_FLATTENING * (2.0 - WGS84_FLATTENING);
                let n = R_EARTH / (1.0 - e2 * sp * sp).sqrt();
                (Vec3::new(n * cp * cl, n * cp * sl, n * (1.0 - e2) * sp), up)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochClock {
    pub initial_utc: NaiveDateTime,
    pub earth_rotation_rate: f64,
    /// Greenwich mean sidereal angle at the epoch, rad.
    pub gmst0: f64,
}

impl EpochClock {
    pub fn new(initial_utc: NaiveDateTime) -> Self {
        EpochClock {
            initial_utc,
            earth_rotation_rate: OMEGA_EARTH,
            gmst0: gmst_from_jd(julian_date(&initial_utc)),
        }
    }

    pub fn julian_date0(&self) -> f64 {
        julian_date(&self.initial_utc)
    }

    pub fn gmst(&self, t: f64) -> f64 {
        (self.gmst0 + self.earth_rotation_rate * t).rem_euclid(std::f64::consts::TAU)
    }

    pub fn ecef_to_eci(&self, x: &Vec3, t: f64) -> Vec3 {
        let (s, c) = self.gmst(t).sin_cos();
        Vec3::new(c * x.x - s * x.y, s * x.x + c * x.y, x.z)
    }
}

pub fn julian_date(utc: &NaiveDateTime) -> f64 {
    let ts = utc.and_utc();
    let secs = ts.timestamp() as f64 + ts.timestamp_subsec_nanos() as f64 * 1e-9;
    JD_UNIX_EPOCH + secs / 86_400.0
}

/// IAU 1982 GMST polynomial; UTC is used in place of UT1.
pub fn gmst_from_jd(jd: f64) -> f64 {
    let t = (jd - JD_J2000) / 36_525.0;
    let secs = 67_310.548_41 + (876_600.0 * 3600.0 + 8_640_184.812_866) * t + 0.093_104 * t * t - 6.2e-6 * t * t * t;
    (secs.rem_euclid(86_400.0) / 86_400.0) * std::f64::consts::TAU
}

/// Inertial position, velocity and outward normal of a station at time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub up: Vec3,
}

impl SiteState {
    /// Site on a sphere: the normal is the radial direction.
    pub fn spherical(pos: Vec3, vel: Vec3) -> Self {
        SiteState { pos, vel, up: pos.normalize() }
    }
}

pub fn site_state(gs: &GroundStation, clock: &EpochClock, t: f64, shape: EarthShape) -> SiteState {
    let (p, n) = gs.ecef(shape);
    let pos = clock.ecef_to_eci(&p, t);
    let up = clock.ecef_to_eci(&n, t);
    let vel = Vec3::new(0.0, 0.0, clock.earth_rotation_rate).cross(&pos);
    SiteState { pos, vel, up }
}

/// Station position on the spherical Earth.
pub fn ground_station_eci(gs: &GroundStation, clock: &EpochClock, t: f64) -> Vec3 {
    site_state(gs, clock, t, EarthShape::Sphere).pos
}

/// Unit vector towards the Sun from the almanac's low-precision series
/// (about 0.01 deg over 1950-2050).
pub fn sun_direction(clock: &EpochClock, t: f64) -> Vec3 {
    let n = clock.julian_date0() + t / 86_400.0 - JD_J2000;
    let l = (280.460 + 0.985_647_4 * n).to_radians();
    let g = (357.528 + 0.985_600_3 * n).to_radians();
    let lambda = l + (1.915_f64.to_radians()) * g.sin() + (0.020_f64.to_radians()) * (2.0 * g).sin();
    let eps = (23.439 - 4.0e-7 * n).to_radians();
    Vec3::new(lambda.cos(), eps.cos() * lambda.sin(), eps.sin() * lambda.sin())
}

pub fn solar_elevation_deg(gs: &GroundStation, clock: &EpochClock, t: f64, shape: EarthShape) -> f64 {
    let site = site_state(gs, clock, t, shape);
    sun_direction(clock, t).dot(&site.up).clamp(-1.0, 1.0).asin().to_degrees()
}

pub fn is_night(gs: &GroundStation, clock: &EpochClock, t: f64, threshold_deg: f64, shape: EarthShape) -> bool {
    solar_elevation_deg(gs, clock, t, shape) < threshold_deg
}
