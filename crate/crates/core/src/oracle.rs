//! Discrete-event Monte-Carlo of the swapping protocol, bin by bin.
//!
//! Used to check the closed forms in [`crate::swap`]. Empty bins are skipped
//! with geometric jumps, so cost scales with the number of heralds rather
//! than the number of bins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::swap::{BinMemory, LinkState};

pub const RNG_NAME: &str = "ChaCha12 (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub n_bins: u64,
    pub seed: u64,
    pub link: LinkState,
    pub mem_a: BinMemory,
    pub mem_b: BinMemory,
    /// Batches for the batch-means standard error.
    pub batches: u32,
}

impl OracleConfig {
    pub fn new(n_bins: u64, seed: u64, link: LinkState, mem_a: BinMemory, mem_b: BinMemory) -> Self {
        OracleConfig { n_bins, seed, link, mem_a, mem_b, batches: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct OracleCounts {
    pub n_bins: u64,
    pub attempted: u64,
    pub successful: u64,
    pub correct: u64,
    pub erroneous: u64,
    pub se_attempted: f64,
    pub se_successful: f64,
    pub se_correct: f64,
    pub se_erroneous: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    A,
    B,
}

struct Waiting {
    side: Side,
    bin: u64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    att: u64,
    succ: u64,
    corr: u64,
    err: u64,
}

struct Protocol<'a> {
    cfg: &'a OracleConfig,
    rng: ChaCha12Rng,
}

impl Protocol<'_> {
    fn mem(&self, s: Side) -> (&BinMemory, u64) {
        match s {
            Side::A => (&self.cfg.mem_a, self.cfg.link.d_rt_a),
            Side::B => (&self.cfg.mem_b, self.cfg.link.d_rt_b),
        }
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    /// Retrieval and flip sampling for one photon stored `storage` bins.
    /// Returns the readout sign, or `None` if the photon was lost.
    fn read_out(&mut self, side: Side, storage: u64) -> Option<bool> {
        let (m, _) = self.mem(side);
        let (ln_p, ln_coh, ret, plus) = (m.ln_p, m.ln_coh, m.eta_ret, m.eta_plus);
        let s = storage as f64;
        if !self.bernoulli(ret * (ln_p * s).exp()) {
            return None;
        }
        Some(self.bernoulli(0.5 * (1.0 + plus * (ln_coh * s).exp())))
    }

    fn attempt(&mut self, t: &mut Tally, x: (Side, u64), y: (Side, u64)) {
        t.att += 1;
        // both photons are read out; either may be lost
        let sx = self.read_out(x.0, x.1);
        let sy = self.read_out(y.0, y.1);
        if let (Some(a), Some(b)) = (sx, sy) {
            t.succ += 1;
            if a == b {
                t.corr += 1;
            } else {
                t.err += 1;
            }
        }
    }
}

pub fn run_oracle(cfg: &OracleConfig) -> OracleCounts {
    let batches = cfg.batches.max(1) as u64;
    let mut per_batch = vec![Tally::default(); batches as usize];
    let link = &cfg.link;
    let ln_q = (-link.eta_a).ln_1p() + (-link.eta_b).ln_1p();
    let mut proto = Protocol { cfg, rng: ChaCha12Rng::seed_from_u64(cfg.seed) };
    let p_any = -ln_q.exp_m1();

    if p_any > 0.0 && cfg.n_bins > 0 {
        let w_ab = link.eta_a * link.eta_b / p_any;
        let w_a = link.eta_a * (1.0 - link.eta_b) / p_any;
        let batch_len = cfg.n_bins.div_ceil(batches);
        let mut waiting: Option<Waiting> = None;
        let mut bin: u64 = 0;
        loop {
            // idle bins before the next herald
            if ln_q != f64::NEG_INFINITY {
                let u = 1.0 - proto.rng.random::<f64>();
                let gap = (u.ln() / ln_q).floor();
                if gap >= (cfg.n_bins - bin) as f64 {
                    break;
                }
                bin += gap as u64;
            }
            if bin >= cfg.n_bins {
                break;
            }
            let tally = &mut per_batch[(bin / batch_len) as usize];
            let u = proto.rng.random::<f64>();
            let (d_rt_a, d_rt_b) = (link.d_rt_a, link.d_rt_b);
            if u < w_ab {
                proto.attempt(tally, (Side::A, d_rt_a), (Side::B, d_rt_b));
                waiting = None;
            } else {
                let side = if u < w_ab + w_a { Side::A } else { Side::B };
                waiting = match waiting.take() {
                    Some(w) if w.side != side => {
                        let age = bin - w.bin;
                        let cut = match w.side {
                            Side::A => link.d_cut_a,
                            Side::B => link.d_cut_b,
                        };
                        if age <= cut {
                            let (_, rt_w) = proto.mem(w.side);
                            let (_, rt_n) = proto.mem(side);
                            proto.attempt(tally, (w.side, rt_w + age - 1), (side, rt_n));
                            None
                        } else {
                            Some(Waiting { side, bin })
                        }
                    }
                    // newest herald wins
                    _ => Some(Waiting { side, bin }),
                };
            }
            bin += 1;
            if bin >= cfg.n_bins {
                break;
            }
        }
    }

    let total = per_batch.iter().fold(Tally::default(), |acc, t| Tally {
        att: acc.att + t.att,
        succ: acc.succ + t.succ,
        corr: acc.corr + t.corr,
        err: acc.err + t.err,
    });
    let se = |f: fn(&Tally) -> u64| -> f64 {
        let xs: Vec<f64> = per_batch.iter().map(|t| f(t) as f64).collect();
        let n = xs.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // standard error of the sum of n batches
        (var * n).sqrt()
    };
    OracleCounts {
        n_bins: cfg.n_bins,
        attempted: total.att,
        successful: total.succ,
        correct: total.corr,
        erroneous: total.err,
        se_attempted: se(|t| t.att),
        se_successful: se(|t| t.succ),
        se_correct: se(|t| t.corr),
        se_erroneous: se(|t| t.err),
    }
}

/// One analytic-vs-simulated comparison cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchCell {
    pub eta_a: f64,
    pub eta_b: f64,
    pub d_rt: u64,
    pub seed: u64,
    /// Expected counts over `n_bins`: attempted, successful, correct, erroneous.
    pub analytic: [f64; 4],
    pub simulated: [u64; 4],
    pub se: [f64; 4],
}

impl BenchCell {
    /// (analytic - simulated) / se per count; 0 where both agree exactly.
    pub fn z(&self) -> [f64; 4] {
        std::array::from_fn(|k| {
            let d = self.analytic[k] - self.simulated[k] as f64;
            if d == 0.0 {
                0.0
            } else {
                d / self.se[k]
            }
        })
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z().iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

/// Seed of cell `index` derived from a base seed.
pub fn cell_seed(base: u64, index: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index)
}

/// Full grid over eta_A x eta_B x round trip with both memories equal and a
/// fixed cutoff pair.
#[allow(clippy::too_many_arguments)]
pub fn bench_grid(
    etas: &[f64],
    d_rts: &[u64],
    d_cut: (u64, u64),
    mem: BinMemory,
    n_bins: u64,
    batches: u32,
    base_seed: u64,
) -> Vec<BenchCell> {
    let mut out = Vec::with_capacity(etas.len() * etas.len() * d_rts.len());
    for &d_rt in d_rts {
        for &eta_a in etas {
            for &eta_b in etas {
                let seed = cell_seed(base_seed, out.len() as u64);
                let link = LinkState { eta_a, eta_b, d_rt_a: d_rt, d_rt_b: d_rt, d_cut_a: d_cut.0, d_cut_b: d_cut.1 };
                let r = crate::swap::bsm_rates(&link, &mem, &mem).scaled(n_bins as f64);
                let c = run_oracle(&OracleConfig { batches, ..OracleConfig::new(n_bins, seed, link, mem, mem) });
                out.push(BenchCell {
                    eta_a,
                    eta_b,
                    d_rt,
                    seed,
                    analytic: [r.attempted, r.successful, r.correct, r.erroneous],
                    simulated: [c.attempted, c.successful, c.correct, c.erroneous],
                    se: [c.se_attempted, c.se_successful, c.se_correct, c.se_erroneous],
                });
            }
        }
    }
    out
}
