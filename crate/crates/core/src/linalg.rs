//! Fixed-size 3-vector helpers and the invariant system matrix.

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Rows are the coefficients of the three gray invariants:
///
/// ```text
/// [   1     1   -β₁ ]
/// [   1   -β₂    1  ]
/// [ -β₃     1    1  ]
/// ```
pub fn system_matrix(beta: Vec3) -> [Vec3; 3] {
    [
        [1.0, 1.0, -beta[0]],
        [1.0, -beta[1], 1.0],
        [-beta[2], 1.0, 1.0],
    ]
}

pub fn mat_vec(m: &[Vec3; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Neumaier-compensated running sum of 3-vectors. Order-dependent by nature;
/// callers feed it in row-major pixel order.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: Vec3,
    carry: Vec3,
}

impl CompensatedSum {
    #[allow(clippy::needless_range_loop)]
    pub fn add(&mut self, v: Vec3) {
        for i in 0..3 {
            let t = self.sum[i] + v[i];
            if self.sum[i].abs() >= v[i].abs() {
                self.carry[i] += (self.sum[i] - t) + v[i];
            } else {
                self.carry[i] += (v[i] - t) + self.sum[i];
            }
            self.sum[i] = t;
        }
    }

    pub fn total(&self) -> Vec3 {
        add(self.sum, self.carry)
    }
}
