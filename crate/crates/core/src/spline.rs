//! Natural cubic splines on non-uniform knots.

use num_complex::Complex64;

#[derive(Clone, Copy)]
enum End {
    Curvature(f64),
    Slope(f64),
}

/// Interpolating cubic spline, natural unless other end conditions are
/// requested.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl CubicSpline {
    /// Builds the spline through (x_i, y_i); `x` must be strictly increasing
    /// with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self::with_end_curvature(x, y, 0.0, 0.0)
    }

    /// As [`new`](Self::new) with prescribed second derivatives at the two
    /// end knots.
    pub fn with_end_curvature(x: Vec<f64>, y: Vec<f64>, m_first: f64, m_last: f64) -> Self {
        Self::solve(x, y, End::Curvature(m_first), End::Curvature(m_last))
    }

    /// Clamped spline with prescribed first derivatives at the end knots.
    pub fn with_end_slopes(x: Vec<f64>, y: Vec<f64>, s_first: f64, s_last: f64) -> Self {
        Self::solve(x, y, End::Slope(s_first), End::Slope(s_last))
    }

    fn solve(x: Vec<f64>, y: Vec<f64>, first: End, last: End) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs matching arrays of length >= 2");
        // Row i: a m_{i-1} + b m_i + c m_{i+1} = r.
        let mut a = vec![0.0; n];
        let mut b = vec![1.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            r[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        let h = x[1] - x[0];
        match first {
            End::Curvature(m) => r[0] = m,
            End::Slope(s) => {
                b[0] = h / 3.0;
                c[0] = h / 6.0;
                r[0] = (y[1] - y[0]) / h - s;
            }
        }
        let h = x[n - 1] - x[n - 2];
        match last {
            End::Curvature(m) => r[n - 1] = m,
            End::Slope(s) => {
                a[n - 1] = h / 6.0;
                b[n - 1] = h / 3.0;
                r[n - 1] = s - (y[n - 1] - y[n - 2]) / h;
            }
        }
        // Thomas algorithm
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
        }
        CubicSpline { x, y, m }
    }

    /// Spline of an even function sampled on positive knots: the data are
    /// mirrored to negative abscissae so the result is smooth through 0.
    pub fn new_even(x: &[f64], y: &[f64]) -> Self {
        let (xs, ys) = Self::mirror(x, y);
        CubicSpline::new(xs, ys)
    }

    /// Even spline with slope `s_end` at the outer right knot (and −s_end at
    /// its mirror image).
    pub fn new_even_with_end_slope(x: &[f64], y: &[f64], s_end: f64) -> Self {
        let (xs, ys) = Self::mirror(x, y);
        CubicSpline::with_end_slopes(xs, ys, -s_end, s_end)
    }

    fn mirror(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert!(x[0] >= 0.0);
        let skip_zero = x[0] == 0.0;
        let mut xs = Vec::with_capacity(2 * x.len());
        let mut ys = Vec::with_capacity(2 * x.len());
        for i in (0..x.len()).rev() {
            if i == 0 && skip_zero {
                continue;
            }
            xs.push(-x[i]);
            ys.push(y[i]);
        }
        xs.extend_from_slice(x);
        ys.extend_from_slice(y);
        (xs, ys)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Index of the knot interval used for `t`.
    #[inline]
    pub fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0;
        }
        if t >= self.x[n - 1] {
            return n - 2;
        }
        self.x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2)
    }

    /// Value, first and second derivative at `t`.  Outside the knot range
    /// the end cubic is continued.
    #[inline]
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        self.eval3_in(self.interval(t), t)
    }

    /// As [`eval3`](Self::eval3) with the interval already located, for
    /// splines sharing one set of knots.
    #[inline]
    pub fn eval3_in(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.eval3(t).0
    }

    /// Largest |y''|·h² over the knot intervals with x ≥ `from`, a crude
    /// resolution gauge.
    pub fn curvature_gauge(&self, from: f64) -> f64 {
        self.x
            .windows(2)
            .zip(self.m.windows(2))
            .filter(|(xw, _)| xw[0] >= from)
            .map(|(xw, mw)| {
                let h = xw[1] - xw[0];
                mw[0].abs().max(mw[1].abs()) * h * h
            })
            .fold(0.0, f64::max)
    }
}

/// Pair of real splines for a complex-valued function.
#[derive(Clone, Debug)]
pub struct ComplexSpline {
    re: CubicSpline,
    im: CubicSpline,
}

impl ComplexSpline {
    pub fn new_even(x: &[f64], y: &[Complex64]) -> Self {
        let re: Vec<f64> = y.iter().map(|v| v.re).collect();
        let im: Vec<f64> = y.iter().map(|v| v.im).collect();
        ComplexSpline { re: CubicSpline::new_even(x, &re), im: CubicSpline::new_even(x, &im) }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Complex64 {
        Complex64::new(self.re.eval(t), self.im.eval(t))
    }
}
