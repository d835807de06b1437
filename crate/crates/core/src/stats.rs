//! Small statistics helpers shared by the sampler and the inequality lab.

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 50;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = KahanSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64
}

/// Mean of each of `batches` contiguous batches. The tail that does not fill
/// a whole batch is spread over the leading batches.
pub fn batch_means(values: &[f64], batches: usize) -> Vec<f64> {
    let n = values.len();
    let b = batches.clamp(1, n.max(1));
    let base = n / b;
    let extra = n % b;
    let mut out = Vec::with_capacity(b);
    let mut start = 0;
    for i in 0..b {
        let len = base + usize::from(i < extra);
        if len == 0 {
            continue;
        }
        out.push(mean(&values[start..start + len]));
        start += len;
    }
    out
}

/// Mean and batch-means standard error.
pub fn mean_and_se(values: &[f64], batches: usize) -> (f64, f64) {
    let m = mean(values);
    let bm = batch_means(values, batches);
    if bm.len() < 2 {
        return (m, 0.0);
    }
    (m, (variance(&bm) / bm.len() as f64).sqrt())
}

/// Standard error of the ratio of two means, by the delta method over batch means.
pub fn ratio_and_se(num: &[f64], den: &[f64], batches: usize) -> (f64, f64) {
    let n = mean(num);
    let d = mean(den);
    let r = n / d;
    let bn = batch_means(num, batches);
    let bd = batch_means(den, batches);
    let k = bn.len();
    if k < 2 {
        return (r, 0.0);
    }
    let lin: Vec<f64> = bn.iter().zip(&bd).map(|(a, b)| (a - r * b) / d).collect();
    (r, (variance(&lin) / k as f64).sqrt())
}

/// Effective sample size from Geyer's initial positive sequence estimator.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let c0 = sum(centered.iter().map(|v| v * v)) / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        sum((0..n - lag).map(|i| centered[i] * centered[i + lag])) / n as f64
    };
    let max_lag = (n / 2).min(5000);
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < max_lag {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn batch_means_cover_all_values() {
        let v: Vec<f64> = (0..103).map(|i| i as f64).collect();
        let bm = batch_means(&v, 10);
        assert_eq!(bm.len(), 10);
        let (m, se) = mean_and_se(&v, 10);
        assert!((m - 51.0).abs() < 1e-12);
        assert!(se > 0.0);
    }

    #[test]
    fn ess_of_iid_is_close_to_n() {
        let mut r = crate::seed::rng(1);
        use rand::Rng;
        let v: Vec<f64> = (0..4000).map(|_| r.random::<f64>()).collect();
        let ess = effective_sample_size(&v);
        assert!(ess > 2500.0, "ess {ess}");
    }

    #[test]
    fn ks_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert!((ks_statistic(&[0.0, 1.0], &[2.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
