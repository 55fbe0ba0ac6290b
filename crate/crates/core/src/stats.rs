//! Hartigan's dip test of unimodality and kernel-density mode finding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dip statistic with the modal interval `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub dip: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Hartigan & Hartigan's dip of the empirical distribution of `xs`: the
/// sup-distance to the closest unimodal distribution function. Ranges over
/// `[1/(2n), 1/4]`.
pub fn dip_statistic(xs: &[f64]) -> Result<Dip> {
    if xs.is_empty() {
        return Err(Error::invalid("dip of an empty sample"));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample value".into()));
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    // 1-based indexing mirrors the classical algorithm
    let x = |i: usize| s[i - 1];
    let mut dip = 1.0;
    let (mut low, mut high) = (1usize, n);
    if n < 2 || x(n) == x(1) {
        return Ok(Dip { dip: dip / (2 * n) as f64, lower: x(1), upper: x(n) });
    }
    // indices of the greatest convex minorant and least concave majorant
    let mut mn = vec![0usize; n + 1];
    let mut mj = vec![0usize; n + 1];
    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            let mnmnj = mn[mnj];
            if mnj == 1 || (x(j) - x(mnj)) * ((mnj - mnmnj) as f64) < (x(mnj) - x(mnmnj)) * ((j - mnj) as f64) {
                break;
            }
            mn[j] = mnmnj;
        }
    }
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            let mjmjk = mj[mjk];
            if mjk == n || (x(k) - x(mjk)) * (mjk as f64 - mjmjk as f64) < (x(mjk) - x(mjmjk)) * (k as f64 - mjk as f64) {
                break;
            }
            mj[k] = mjmjk;
        }
    }
    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];
    loop {
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;
        lcm[1] = low;
        let mut i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2;
        let mut d = 0.0;
        if l_gcm != 2 || l_lcm != 2 {
            loop {
                let (gcmix, lcmiv) = (gcm[ix], lcm[iv]);
                if gcmix > lcmiv {
                    let gcmi1 = gcm[ix + 1];
                    let dx = (lcmiv - gcmi1 + 1) as f64
                        - (x(lcmiv) - x(gcmi1)) * (gcmix - gcmi1) as f64 / (x(gcmix) - x(gcmi1));
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcmiv1 = lcm[iv - 1];
                    let dx = (x(gcmix) - x(lcmiv1)) * (lcmiv - lcmiv1) as f64 / (x(lcmiv) - x(lcmiv1))
                        - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                ix = ix.max(1);
                iv = iv.min(l_lcm);
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }
        if d < dip {
            break;
        }
        // dips of the minorant and majorant on the current interval
        let mut dip_l: f64 = 0.0;
        for j in ig..l_gcm {
            let mut max_t: f64 = 1.0;
            let (jb, je) = (gcm[j + 1], gcm[j]);
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    max_t = max_t.max((jj - jb + 1) as f64 - (x(jj) - x(jb)) * c);
                }
            }
            dip_l = dip_l.max(max_t);
        }
        let mut dip_u: f64 = 0.0;
        for j in ih..l_lcm {
            let mut max_t: f64 = 1.0;
            let (jb, je) = (lcm[j], lcm[j + 1]);
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    max_t = max_t.max((x(jj) - x(jb)) * c - (jj as f64 - jb as f64 - 1.0));
                }
            }
            dip_u = dip_u.max(max_t);
        }
        dip = f64::max(dip, dip_l.max(dip_u));
        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }
    Ok(Dip { dip: dip / (2 * n) as f64, lower: x(low), upper: x(high) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipTest {
    pub dip: Dip,
    pub n: usize,
    /// Monte-Carlo p-value against the uniform law (the least favourable
    /// unimodal null), with the `(k+1)/(B+1)` correction.
    pub p_value: f64,
    pub replicates: usize,
}

/// Dip test with a p-value from `replicates` uniform samples of equal size.
pub fn dip_test(xs: &[f64], replicates: usize, seed: u64) -> Result<DipTest> {
    if replicates == 0 {
        return Err(Error::invalid("dip test needs at least one replicate"));
    }
    let dip = dip_statistic(xs)?;
    let n = xs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let mut exceed = 0;
    for _ in 0..replicates {
        buf.iter_mut().for_each(|v| *v = rng.random());
        if dip_statistic(&buf)?.dip >= dip.dip {
            exceed += 1;
        }
    }
    Ok(DipTest { dip, n, p_value: (exceed + 1) as f64 / (replicates + 1) as f64, replicates })
}

/// Silverman's rule-of-thumb bandwidth `0.9·min(σ, IQR/1.34)·n^{−1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::invalid("bandwidth needs at least two points"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1.0);
        let (i, f) = (h.floor() as usize, h.fract());
        s[i] + f * (s[(i + 1).min(s.len() - 1)] - s[i])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::invalid("bandwidth of a degenerate sample"));
    }
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Local maxima of a Gaussian kernel density estimate on a regular grid
/// over `[lo, hi]`, sorted by decreasing height as `(location, density)`.
pub fn kde_modes(xs: &[f64], bandwidth: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if !(bandwidth > 0.0) || !(hi > lo) || points < 3 {
        return Err(Error::invalid("kde needs a positive bandwidth, a nonempty range and 3 grid points"));
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (xs.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let mut dens = vec![0.0; points];
    for &v in xs {
        // the kernel is negligible beyond 6 bandwidths
        let a = (((v - 6.0 * bandwidth - lo) / step).floor().max(0.0)) as usize;
        let b = (((v + 6.0 * bandwidth - lo) / step).ceil().max(0.0) as usize).min(points - 1);
        for (k, d) in dens.iter_mut().enumerate().take(b + 1).skip(a) {
            let z = (lo + k as f64 * step - v) / bandwidth;
            *d += (-0.5 * z * z).exp();
        }
    }
    let mut modes: Vec<(f64, f64)> = (0..points)
        .filter(|&k| {
            let left = if k == 0 { f64::NEG_INFINITY } else { dens[k - 1] };
            let right = if k + 1 == points { f64::NEG_INFINITY } else { dens[k + 1] };
            dens[k] > 0.0 && dens[k] > left && dens[k] >= right
        })
        .map(|k| (lo + k as f64 * step, dens[k] * norm))
        .collect();
    modes.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(modes)
}
