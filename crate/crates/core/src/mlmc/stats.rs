/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Running mean and unbiased variance over values fed in index order.
///
/// Values are shifted by the first observation before accumulation so that
/// a large common offset does not swamp the variance.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct SampleMoments {
    count: u64,
    shift: f64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl SampleMoments {
    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.shift = x;
        }
        self.count += 1;
        let y = x - self.shift;
        self.sum.add(y);
        self.sum_sq.add(y * y);
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.sum.value() / self.count as f64
    }

    /// `None` with fewer than two observations.
    pub fn variance(&self) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        let s = self.sum.value();
        Some(((self.sum_sq.value() - s * s / n) / (n - 1.0)).max(0.0))
    }
}

/// Least-squares fit of `y = c x^e` on log-log axes; returns `(c, e)`.
pub(crate) fn fit_power_law(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let points: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(((my - slope * mx).exp(), slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn moments_of_offset_data() {
        let mut m = SampleMoments::default();
        for x in [1e9 + 1.0, 1e9 + 2.0, 1e9 + 3.0, 1e9 + 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 1e9 + 2.5);
        assert!((m.variance().unwrap() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_observation_has_no_variance() {
        let mut m = SampleMoments::default();
        m.push(3.0);
        assert_eq!(m.variance(), None);
        assert_eq!(m.mean(), 3.0);
    }

    #[test]
    fn power_law_fit() {
        let x = [0.5, 0.25, 0.125, 0.0625];
        let y: Vec<f64> = x.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        let (c, e) = fit_power_law(&x, &y).unwrap();
        assert!((c - 3.0).abs() < 1e-12 && (e - 1.5).abs() < 1e-12);
        assert!(fit_power_law(&[1.0], &[1.0]).is_none());
    }
}
