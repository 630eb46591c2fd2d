//! Probe functions with analytic derivatives of every order.

/// A scalar function with exact mixed partial derivatives.
pub trait SmoothFunction {
    fn eval(&self, x: f64, y: f64) -> f64;
    /// `d^(nx+ny) u / dx^nx dy^ny`.
    fn derivative(&self, nx: u32, ny: u32, x: f64, y: f64) -> f64;
}

/// A bivariate polynomial `sum c x^i y^j`.
#[derive(Clone, Debug)]
pub struct Polynomial {
    terms: Vec<(u32, u32, f64)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Polynomial { terms }
    }
}

fn falling(base: u32, k: u32) -> f64 {
    (0..k).map(|r| (base - r) as f64).product()
}

impl SmoothFunction for Polynomial {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    fn derivative(&self, nx: u32, ny: u32, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .filter(|&&(i, j, _)| i >= nx && j >= ny)
            .map(|&(i, j, c)| {
                c * falling(i, nx)
                    * falling(j, ny)
                    * x.powi((i - nx) as i32)
                    * y.powi((j - ny) as i32)
            })
            .sum()
    }
}

/// `sin(x) cos(y)`, the nonpolynomial guard.
#[derive(Clone, Copy, Debug)]
pub struct SinCos;

impl SmoothFunction for SinCos {
    fn eval(&self, x: f64, y: f64) -> f64 {
        x.sin() * y.cos()
    }

    fn derivative(&self, nx: u32, ny: u32, x: f64, y: f64) -> f64 {
        // d^n/dx^n sin(x) cycles through sin, cos, -sin, -cos
        let fx = match nx % 4 {
            0 => x.sin(),
            1 => x.cos(),
            2 => -x.sin(),
            _ => -x.cos(),
        };
        // d^n/dy^n cos(y) cycles through cos, -sin, -cos, sin
        let fy = match ny % 4 {
            0 => y.cos(),
            1 => -y.sin(),
            2 => -y.cos(),
            _ => y.sin(),
        };
        fx * fy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // u = x^3 y + 2 y^2
        let p = Polynomial::new(vec![(3, 1, 1.0), (0, 2, 2.0)]);
        assert_eq!(p.eval(2.0, 1.0), 8.0 + 2.0);
        assert_eq!(p.derivative(1, 0, 2.0, 1.0), 12.0);
        assert_eq!(p.derivative(2, 1, 2.0, 3.0), 12.0);
        assert_eq!(p.derivative(0, 2, 0.0, 5.0), 4.0);
        assert_eq!(p.derivative(4, 0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn sincos_derivatives_by_finite_differences() {
        let f = SinCos;
        let (x, y) = (0.4, 0.7);
        let h = 1e-5;
        let dx = (f.eval(x + h, y) - f.eval(x - h, y)) / (2.0 * h);
        assert!((dx - f.derivative(1, 0, x, y)).abs() < 1e-9);
        let dyy = (f.eval(x, y + h) - 2.0 * f.eval(x, y) + f.eval(x, y - h)) / (h * h);
        assert!((dyy - f.derivative(0, 2, x, y)).abs() < 1e-5);
        let dxy = (f.eval(x + h, y + h) - f.eval(x + h, y - h) - f.eval(x - h, y + h)
            + f.eval(x - h, y - h))
            / (4.0 * h * h);
        assert!((dxy - f.derivative(1, 1, x, y)).abs() < 1e-5);
    }
}
