//! Interpolation and cumulative integration helpers shared by the signal model,
//! the estimator and the diagnostics.

/// Natural cubic spline through `(x_i, y_i)`.
///
/// Outside `[x_0, x_{n-1}]` the spline is extended linearly with the end slope.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
    uniform_step: Option<f64>,
}

impl CubicSpline {
    /// Panics if fewer than two knots are given or if lengths differ.
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len(), "knot/value length mismatch");
        assert!(x.len() >= 2, "a spline needs at least two knots");
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let mut c_prime = vec![0.0; n];
            let mut d_prime = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let c = h1 / 6.0;
                let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c_prime[i - 1];
                c_prime[i] = c / denom;
                d_prime[i] = (d - a * d_prime[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d_prime[i] - c_prime[i] * m[i + 1];
            }
        }
        let h = x[1] - x[0];
        let uniform = x
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0));
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
            uniform_step: uniform.then_some(h),
        }
    }

    /// Spline on the uniform grid `x_i = x0 + i * step`.
    pub fn uniform(x0: f64, step: f64, y: &[f64]) -> Self {
        let x: Vec<f64> = (0..y.len()).map(|i| x0 + i as f64 * step).collect();
        Self::natural(&x, y)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        if let Some(h) = self.uniform_step {
            let k = ((t - self.x[0]) / h).floor();
            return (k.max(0.0) as usize).min(n - 2);
        }
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k => (k - 1).min(n - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] {
            return self.y[0] + self.deriv(self.x[0]) * (t - self.x[0]);
        }
        if t > self.x[n - 1] {
            return self.y[n - 1] + self.deriv(self.x[n - 1]) * (t - self.x[n - 1]);
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let n = self.x.len();
        let tc = t.clamp(self.x[0], self.x[n - 1]);
        let i = self.segment(tc);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - tc) / h;
        let b = (tc - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }

    /// True when `t` lies inside the knot span (no extrapolation needed).
    pub fn contains(&self, t: f64) -> bool {
        t >= self.x[0] && t <= self.x[self.x.len() - 1]
    }
}

/// Piecewise-linear interpolation on increasing `x`; returns `None` outside the span.
pub fn linear_interp(x: &[f64], y: &[f64], t: f64) -> Option<f64> {
    let n = x.len();
    if n == 0 || t < x[0] || t > x[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(y[0]);
    }
    let k = x.partition_point(|&xi| xi <= t);
    let i = if k == 0 { 0 } else { (k - 1).min(n - 2) };
    let h = x[i + 1] - x[i];
    if h <= 0.0 {
        return Some(y[i]);
    }
    let w = (t - x[i]) / h;
    Some(y[i] * (1.0 - w) + y[i + 1] * w)
}

/// Cumulative trapezoid of uniformly sampled `f` with step `dt`, starting at 0.
pub fn cumulative_trapezoid(f: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in f.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
        out.push(acc);
    }
    out.truncate(f.len());
    out
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(f: &[f64], dt: f64) -> f64 {
    if f.len() < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..f.len() - 1].iter().sum();
    dt * (inner + 0.5 * (f[0] + f[f.len() - 1]))
}

/// Cubic Hermite interpolation from values and derivatives on a uniform grid.
#[derive(Debug, Clone)]
pub(crate) struct HermiteTable {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl HermiteTable {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = (t - self.t0) / self.dt;
        if u <= 0.0 {
            return self.values[0] + self.derivs[0] * (t - self.t0);
        }
        let last = (n - 1) as f64;
        if u >= last {
            return self.values[n - 1] + self.derivs[n - 1] * (t - self.t0 - last * self.dt);
        }
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h10 * self.dt * self.derivs[i]
            + h01 * self.values[i + 1]
            + h11 * self.dt * self.derivs[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_knots_and_cubics_closely() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| (t * 1.3).sin()).collect();
        let s = CubicSpline::natural(&x, &y);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-12);
        }
        let mid = 1.95;
        assert!((s.eval(mid) - (mid * 1.3).sin()).abs() < 1e-4);
        assert!((s.deriv(mid) - 1.3 * (mid * 1.3).cos()).abs() < 1e-3);
    }

    #[test]
    fn linear_interp_outside_is_none() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 2.0, 0.0];
        assert_eq!(linear_interp(&x, &y, 0.5), Some(1.0));
        assert_eq!(linear_interp(&x, &y, 2.5), None);
        assert_eq!(linear_interp(&x, &y, -0.1), None);
    }

    #[test]
    fn cumulative_trapezoid_of_constant_is_linear() {
        let f = vec![2.0; 11];
        let c = cumulative_trapezoid(&f, 0.1);
        assert!((c[10] - 2.0).abs() < 1e-12);
        assert_eq!(c[0], 0.0);
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let dt = 0.25;
        let ts: Vec<f64> = (0..9).map(|i| i as f64 * dt).collect();
        let table = HermiteTable {
            t0: 0.0,
            dt,
            values: ts.iter().map(|&t| f(t)).collect(),
            derivs: ts.iter().map(|&t| df(t)).collect(),
        };
        for t in [0.1, 0.77, 1.3, 1.99] {
            assert!((table.eval(t) - f(t)).abs() < 1e-12);
        }
    }
}
