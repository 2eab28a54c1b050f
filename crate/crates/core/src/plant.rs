//! Affine SISO plants `ẋ = f(x) + g(x)u`, `y = h(x)` and the virtual output `L_g h`.

use crate::scalar::Scalar;

/// An input-affine single-input single-output plant.
pub trait Plant<T: Scalar> {
    fn dim(&self) -> usize;

    /// Drift `f`. `t` selects the piece of any exogenous piecewise-constant
    /// input (e.g. a disturbance schedule); callers integrating across a
    /// switch pass the midpoint of the current step.
    fn drift(&self, t: T, x: &[T], out: &mut [T]);

    /// Input direction `g`.
    fn input_field(&self, x: &[T], out: &mut [T]);

    /// Measured output `h`.
    fn output(&self, x: &[T]) -> T;

    /// Closed-form `L_g h`, when known.
    fn lgh_analytic(&self, _x: &[T]) -> Option<T> {
        None
    }

    /// Closed-form `L_g² h = L_g(L_g h)`, when known.
    fn lg2h_analytic(&self, _x: &[T]) -> Option<T> {
        None
    }
}

fn fd_step<T: Scalar>(xi: T) -> T {
    let base = if T::epsilon() < T::lit(1e-10) { T::lit(1e-6) } else { T::epsilon().cbrt() };
    base * xi.abs().max(T::one())
}

/// Central finite-difference `∇φ(x)·dir`.
pub fn lie_derivative_fd<T, F>(phi: F, dir: &[T], x: &[T]) -> T
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    let mut probe = x.to_vec();
    let mut acc = T::zero();
    for i in 0..x.len() {
        if dir[i] == T::zero() {
            continue;
        }
        let d = fd_step(x[i]);
        probe[i] = x[i] + d;
        let up = phi(&probe);
        probe[i] = x[i] - d;
        let down = phi(&probe);
        probe[i] = x[i];
        acc += (up - down) / (d + d) * dir[i];
    }
    acc
}

/// `y_v = L_g h(x)`: the analytic closure when supplied, else finite differences.
pub fn virtual_output<T: Scalar, P: Plant<T> + ?Sized>(p: &P, x: &[T]) -> T {
    if let Some(v) = p.lgh_analytic(x) {
        return v;
    }
    virtual_output_fd(p, x)
}

/// Finite-difference `L_g h(x)`, ignoring any analytic closure.
pub fn virtual_output_fd<T: Scalar, P: Plant<T> + ?Sized>(p: &P, x: &[T]) -> T {
    let mut g = vec![T::zero(); p.dim()];
    p.input_field(x, &mut g);
    lie_derivative_fd(|z| p.output(z), &g, x)
}

/// `L_g² h(x)`: analytic when supplied, else finite differences of [`virtual_output`].
pub fn second_virtual_output<T: Scalar, P: Plant<T> + ?Sized>(p: &P, x: &[T]) -> T {
    if let Some(v) = p.lg2h_analytic(x) {
        return v;
    }
    let mut g = vec![T::zero(); p.dim()];
    p.input_field(x, &mut g);
    lie_derivative_fd(|z| virtual_output(p, z), &g, x)
}

/// `y = h(x)`.
pub fn output<T: Scalar, P: Plant<T> + ?Sized>(p: &P, x: &[T]) -> T {
    p.output(x)
}

/// Piecewise-constant exogenous signal: `value_at(t)` is the value of the last
/// breakpoint at or before `t` (right-continuous), or the initial value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule<T> {
    initial: T,
    breakpoints: Vec<(T, T)>,
}

impl<T: Scalar> Schedule<T> {
    pub fn constant(value: T) -> Self {
        Self { initial: value, breakpoints: Vec::new() }
    }

    /// Breakpoints `(time, value)` are sorted by time.
    pub fn new(initial: T, mut breakpoints: Vec<(T, T)>) -> Self {
        breakpoints.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self { initial, breakpoints }
    }

    pub fn value_at(&self, t: T) -> T {
        self.breakpoints.iter().take_while(|(ti, _)| *ti <= t).last().map_or(self.initial, |(_, v)| *v)
    }

    pub fn initial(&self) -> T {
        self.initial
    }

    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.breakpoints
    }
}

/// The third-order example: `ẋ₁ = x₂, ẋ₂ = x₃, ẋ₃ = u + d`, `y = x₂ + x₁x₃`.
///
/// The observability of `x₁` from `y` degenerates on the equilibria
/// `(x₁ʳᵉᶠ, 0, 0)`, while the virtual output is `L_g h = x₁`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExamplePlant<T> {
    pub disturbance: Schedule<T>,
}

impl<T: Scalar> ExamplePlant<T> {
    pub fn new(disturbance: Schedule<T>) -> Self {
        Self { disturbance }
    }

    pub fn undisturbed() -> Self {
        Self { disturbance: Schedule::constant(T::zero()) }
    }
}

impl<T: Scalar> Plant<T> for ExamplePlant<T> {
    fn dim(&self) -> usize {
        3
    }

    fn drift(&self, t: T, x: &[T], out: &mut [T]) {
        out[0] = x[1];
        out[1] = x[2];
        out[2] = self.disturbance.value_at(t);
    }

    fn input_field(&self, _x: &[T], out: &mut [T]) {
        out[0] = T::zero();
        out[1] = T::zero();
        out[2] = T::one();
    }

    fn output(&self, x: &[T]) -> T {
        x[1] + x[0] * x[2]
    }

    fn lgh_analytic(&self, x: &[T]) -> Option<T> {
        Some(x[0])
    }

    fn lg2h_analytic(&self, _x: &[T]) -> Option<T> {
        Some(T::zero())
    }
}

/// Rows `∂y/∂x` and `∂ẏ/∂x` of the example plant at the equilibrium
/// `(x₁ʳᵉᶠ, 0, 0)`; all higher output derivatives have zero gradient there.
pub fn observability_defect<T: Scalar>(x1_ref: T) -> [[T; 3]; 2] {
    let (z, o) = (T::zero(), T::one());
    [[z, o, x1_ref], [z, z, o]]
}

/// Rank of a small dense row set by Gaussian elimination with partial pivoting.
pub fn row_rank<T: Scalar, const N: usize>(rows: &[[T; N]], tol: T) -> usize {
    let mut m: Vec<[T; N]> = rows.to_vec();
    let mut rank = 0;
    for col in 0..N {
        let pivot = (rank..m.len())
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(std::cmp::Ordering::Equal));
        let Some(p) = pivot else { break };
        if m[p][col].abs() <= tol {
            continue;
        }
        m.swap(rank, p);
        let pivot_row = m[rank];
        for r in (rank + 1)..m.len() {
            let factor = m[r][col] / pivot_row[col];
            for c in col..N {
                m[r][c] -= factor * pivot_row[c];
            }
        }
        rank += 1;
    }
    rank
}

/// Whether `e₁` lies in the span of the output-gradient rows, i.e. whether
/// `x₁` could be recovered from `y` and its derivatives.
pub fn recovers_first_state<T: Scalar>(rows: &[[T; 3]]) -> bool {
    let tol = T::lit(1e3) * T::epsilon();
    let mut with_e1 = rows.to_vec();
    with_e1.push([T::one(), T::zero(), T::zero()]);
    row_rank(&with_e1, tol) == row_rank(rows, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_virtual_output_is_x1() {
        let p = ExamplePlant::<f64>::undisturbed();
        assert_eq!(virtual_output(&p, &[2.0, 5.0, -1.0]), 2.0);
        assert!((virtual_output_fd(&p, &[2.0, 5.0, -1.0]) - 2.0).abs() < 1e-9);
    }

    struct Linear {
        c: [f64; 3],
        g: [f64; 3],
    }

    impl Plant<f64> for Linear {
        fn dim(&self) -> usize {
            3
        }
        fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn input_field(&self, _x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&self.g);
        }
        fn output(&self, x: &[f64]) -> f64 {
            self.c.iter().zip(x).map(|(c, x)| c * x).sum()
        }
    }

    #[test]
    fn linear_plant_has_constant_virtual_output() {
        let p = Linear { c: [1.0, -2.0, 0.5], g: [0.3, 1.0, 2.0] };
        let expected = 0.3 - 2.0 + 1.0;
        for x in [[0.0, 0.0, 0.0], [4.0, -3.0, 2.0], [-1.0, 7.0, 0.1]] {
            assert!((virtual_output(&p, &x) - expected).abs() < 1e-9);
        }
        let zero_g = Linear { c: [1.0, 2.0, 3.0], g: [0.0; 3] };
        assert_eq!(virtual_output(&zero_g, &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn example_output_values() {
        let p = ExamplePlant::<f64>::undisturbed();
        assert_eq!(p.output(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(p.output(&[1.0, 2.0, 3.0]), 5.0);
        for a in [-3.0, 0.0, 0.7, 12.0] {
            assert_eq!(p.output(&[a, 0.0, 0.0]), 0.0);
        }
    }

    #[test]
    fn equilibria_are_invariant() {
        let p = ExamplePlant::<f64>::undisturbed();
        let mut f = [0.0; 3];
        let mut g = [0.0; 3];
        for a in [-2.0, 0.0, 3.5] {
            p.drift(0.0, &[a, 0.0, 0.0], &mut f);
            p.input_field(&[a, 0.0, 0.0], &mut g);
            assert_eq!(f, [0.0; 3]);
        }
    }

    #[test]
    fn schedule_is_right_continuous() {
        let d = Schedule::new(0.0, vec![(2.0, -2.0), (5.0, 1.0)]);
        assert_eq!(d.value_at(1.999), 0.0);
        assert_eq!(d.value_at(2.0), -2.0);
        assert_eq!(d.value_at(4.0), -2.0);
        assert_eq!(d.value_at(6.0), 1.0);
    }

    #[test]
    fn observability_rows() {
        assert_eq!(observability_defect(1.0_f64), [[0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
        assert_eq!(observability_defect(0.0_f64), [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        for a in [0.0, 1.0, -4.2] {
            let rows = observability_defect(a);
            assert_eq!(row_rank(&rows, 1e-12), 2);
            let mut ext = rows.to_vec();
            ext.push([1.0, 0.0, 0.0]);
            assert_eq!(row_rank(&ext, 1e-12), 3);
            assert!(!recovers_first_state(&rows));
        }
        assert!(recovers_first_state(&[[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]));
    }
}
