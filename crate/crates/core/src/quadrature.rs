//! Quadrature rules on intervals and simplices.
//!
//! Simplex rules are conical products of Gauss-Legendre rules (collapsed
//! coordinates), stored as barycentric points with weights normalised to sum
//! to one, so the physical weight is `w * measure`.

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1], ascending order
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on a simplex of dimension `dim` (0 = point).
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub dim: usize,
    /// Barycentric coordinates, `dim + 1` entries used of each.
    pub points: Vec<[f64; 4]>,
    /// Normalised weights (sum to one).
    pub weights: Vec<f64>,
}

impl SimplexRule {
    /// Rule exact for polynomials of total degree `degree` on a `dim`-simplex.
    pub fn new(dim: usize, degree: usize) -> Self {
        match dim {
            0 => SimplexRule {
                dim,
                points: vec![[1.0, 0.0, 0.0, 0.0]],
                weights: vec![1.0],
            },
            1 => {
                let n = degree / 2 + 1;
                let (x, w) = gauss_legendre_unit(n);
                SimplexRule {
                    dim,
                    points: x.iter().map(|&s| [1.0 - s, s, 0.0, 0.0]).collect(),
                    weights: w,
                }
            }
            2 => {
                // x = u, y = v (1 - u); Jacobian (1 - u)
                let (u, wu) = gauss_legendre_unit((degree + 2) / 2 + 1);
                let (v, wv) = gauss_legendre_unit(degree / 2 + 1);
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (a, &ua) in u.iter().enumerate() {
                    for (b, &vb) in v.iter().enumerate() {
                        let x = ua;
                        let y = vb * (1.0 - ua);
                        points.push([1.0 - x - y, x, y, 0.0]);
                        weights.push(2.0 * wu[a] * wv[b] * (1.0 - ua));
                    }
                }
                SimplexRule {
                    dim,
                    points,
                    weights,
                }
            }
            3 => {
                // x = u, y = v (1 - u), z = w (1 - u)(1 - v); Jacobian (1-u)^2 (1-v)
                let (u, wu) = gauss_legendre_unit((degree + 3) / 2 + 1);
                let (v, wv) = gauss_legendre_unit((degree + 2) / 2 + 1);
                let (s, ws) = gauss_legendre_unit(degree / 2 + 1);
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (a, &ua) in u.iter().enumerate() {
                    for (b, &vb) in v.iter().enumerate() {
                        for (c, &sc) in s.iter().enumerate() {
                            let x = ua;
                            let y = vb * (1.0 - ua);
                            let z = sc * (1.0 - ua) * (1.0 - vb);
                            points.push([1.0 - x - y - z, x, y, z]);
                            weights.push(
                                6.0 * wu[a] * wv[b] * ws[c] * (1.0 - ua) * (1.0 - ua) * (1.0 - vb),
                            );
                        }
                    }
                }
                SimplexRule {
                    dim,
                    points,
                    weights,
                }
            }
            _ => panic!("unsupported simplex dimension {dim}"),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Polynomial exactness used for cell integrals (covers `eps * phi_i * phi_j`
/// with quadratic `eps`).
pub const CELL_DEGREE: usize = 4;
/// Polynomial exactness used for boundary-face integrals.
pub const FACE_DEGREE: usize = 3;
/// Gauss points per time interval for data-carrying space-time integrals.
pub const TIME_POINTS: usize = 3;

/// Gauss rule on one time interval `[0, 1]` used by every time integral
/// involving data (Neumann source, cut-off, observations) or estimators.
pub fn time_rule() -> (Vec<f64>, Vec<f64>) {
    gauss_legendre_unit(TIME_POINTS)
}
