//! Dense statevector simulation of small parameterized circuits.
//!
//! Qubit 0 is the most significant bit of the basis index, so on two qubits
//! `|10⟩` has index 2. Rotations follow `R_P(θ) = exp(-iθP/2)`, which gives
//! `RY(θ)|0⟩ = cos(θ/2)|0⟩ + sin(θ/2)|1⟩`.
//!
//! Gradients of Pauli-Z readouts are computed with the adjoint method: one
//! forward pass, then a single backward sweep that un-applies each gate to
//! both the state and the co-state of every readout.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// 2×2 unitary of `exp(-i angle P / 2)` for Pauli `P` given by `axis`.
pub fn rotation_matrix<T: Real>(axis: Axis, angle: T) -> [[Complex<T>; 2]; 2] {
    let half = angle / T::lit(2.0);
    let (s, c) = half.sin_cos();
    let z = T::zero();
    match axis {
        Axis::X => [
            [Complex::new(c, z), Complex::new(z, -s)],
            [Complex::new(z, -s), Complex::new(c, z)],
        ],
        Axis::Y => [
            [Complex::new(c, z), Complex::new(-s, z)],
            [Complex::new(s, z), Complex::new(c, z)],
        ],
        Axis::Z => [
            [Complex::new(c, -s), Complex::new(z, z)],
            [Complex::new(z, z), Complex::new(c, s)],
        ],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector<T> {
    num_qubits: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> Statevector<T> {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << num_qubits];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Ok(Self { num_qubits, amplitudes })
    }

    pub fn from_amplitudes(num_qubits: usize, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if amplitudes.len() != 1 << num_qubits {
            return Err(Error::invalid(format!(
                "{} amplitudes for {num_qubits} qubits",
                amplitudes.len()
            )));
        }
        Ok(Self { num_qubits, amplitudes })
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::invalid(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        Ok(())
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    pub fn apply_rotation(&mut self, axis: Axis, qubit: usize, angle: T) -> Result<()> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::invalid("rotation angle is not finite"));
        }
        self.apply_single(qubit, &rotation_matrix(axis, angle));
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid(format!("CNOT control and target both {control}")));
        }
        self.cnot_unchecked(control, target);
        Ok(())
    }

    /// ⟨Z⟩ on `qubit`, clamped to [-1, 1].
    pub fn expval_z(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        Ok(self.expval_z_unchecked(qubit))
    }

    pub fn expval_z_all(&self) -> Vec<T> {
        (0..self.num_qubits).map(|q| self.expval_z_unchecked(q)).collect()
    }

    fn expval_z_unchecked(&self, qubit: usize) -> T {
        let mask = self.mask(qubit);
        let mut acc = T::zero();
        for (b, a) in self.amplitudes.iter().enumerate() {
            if b & mask == 0 {
                acc += a.norm_sqr();
            } else {
                acc -= a.norm_sqr();
            }
        }
        acc.clamp_unit()
    }

    fn apply_single(&mut self, qubit: usize, m: &[[Complex<T>; 2]; 2]) {
        let mask = self.mask(qubit);
        for b in 0..self.amplitudes.len() {
            if b & mask == 0 {
                let a0 = self.amplitudes[b];
                let a1 = self.amplitudes[b | mask];
                self.amplitudes[b] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[b | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn cnot_unchecked(&mut self, control: usize, target: usize) {
        let cm = self.mask(control);
        let tm = self.mask(target);
        for b in 0..self.amplitudes.len() {
            if b & cm != 0 && b & tm == 0 {
                self.amplitudes.swap(b, b | tm);
            }
        }
    }

    /// Apply the Pauli `axis` itself (not the rotation) to `qubit`.
    fn apply_pauli(&mut self, axis: Axis, qubit: usize) {
        let mask = self.mask(qubit);
        let i = Complex::new(T::zero(), T::one());
        for b in 0..self.amplitudes.len() {
            if b & mask == 0 {
                let a0 = self.amplitudes[b];
                let a1 = self.amplitudes[b | mask];
                let (n0, n1) = match axis {
                    Axis::X => (a1, a0),
                    Axis::Y => (-i * a1, i * a0),
                    Axis::Z => (a0, -a1),
                };
                self.amplitudes[b] = n0;
                self.amplitudes[b | mask] = n1;
            }
        }
    }

    fn inner(&self, other: &Self) -> Complex<T> {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Gate<T> {
    Fixed { axis: Axis, qubit: usize, angle: T },
    Param { axis: Axis, qubit: usize, index: usize },
    Cnot { control: usize, target: usize },
}

/// A gate list whose rotation angles are either fixed or read from a flat
/// parameter vector. Several gates may share one parameter index; their
/// gradient contributions are summed.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCircuit<T> {
    num_qubits: usize,
    num_params: usize,
    gates: Vec<Gate<T>>,
}

impl<T: Real> ParamCircuit<T> {
    pub fn new(num_qubits: usize, num_params: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self { num_qubits, num_params, gates: Vec::new() })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::invalid(format!("qubit {q} out of range")));
        }
        Ok(())
    }

    pub fn fixed(&mut self, axis: Axis, qubit: usize, angle: T) -> Result<&mut Self> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::invalid("fixed rotation angle is not finite"));
        }
        self.gates.push(Gate::Fixed { axis, qubit, angle });
        Ok(self)
    }

    pub fn param(&mut self, axis: Axis, qubit: usize, index: usize) -> Result<&mut Self> {
        self.check_qubit(qubit)?;
        if index >= self.num_params {
            return Err(Error::invalid(format!("parameter index {index} >= {}", self.num_params)));
        }
        self.gates.push(Gate::Param { axis, qubit, index });
        Ok(self)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid(format!("CNOT control and target both {control}")));
        }
        self.gates.push(Gate::Cnot { control, target });
        Ok(self)
    }

    /// CNOT from every qubit `q` to `(q + offset) mod n`. Empty on one qubit.
    pub fn cnot_ring(&mut self, offset: usize) -> Result<&mut Self> {
        let n = self.num_qubits;
        if n > 1 && offset % n != 0 {
            for q in 0..n {
                self.cnot(q, (q + offset) % n)?;
            }
        }
        Ok(self)
    }

    fn check_params(&self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params {
            return Err(Error::invalid(format!(
                "expected {} circuit parameters, got {}",
                self.num_params,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("circuit parameter is not finite"));
        }
        Ok(())
    }

    fn apply_gate(state: &mut Statevector<T>, gate: &Gate<T>, params: &[T], adjoint: bool) {
        let sign = if adjoint { -T::one() } else { T::one() };
        match *gate {
            Gate::Fixed { axis, qubit, angle } => {
                state.apply_single(qubit, &rotation_matrix(axis, sign * angle))
            }
            Gate::Param { axis, qubit, index } => {
                state.apply_single(qubit, &rotation_matrix(axis, sign * params[index]))
            }
            Gate::Cnot { control, target } => state.cnot_unchecked(control, target),
        }
    }

    pub fn run(&self, params: &[T]) -> Result<Statevector<T>> {
        self.check_params(params)?;
        let mut state = Statevector::new(self.num_qubits)?;
        for g in &self.gates {
            Self::apply_gate(&mut state, g, params, false);
        }
        Ok(state)
    }

    /// ⟨Z_q⟩ for every qubit.
    pub fn expectations(&self, params: &[T]) -> Result<Vec<T>> {
        Ok(self.run(params)?.expval_z_all())
    }

    /// Readouts and their Jacobian `∂⟨Z_q⟩/∂params[k]` (qubits × params).
    pub fn expectations_and_jacobian(&self, params: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let mut phi = self.run(params)?;
        let n = self.num_qubits;
        let readout = phi.expval_z_all();
        let mut jac = Matrix::zeros(n, self.num_params);

        let Some(first) = self.gates.iter().position(|g| matches!(g, Gate::Param { .. })) else {
            return Ok((readout, jac));
        };

        let mut lambdas: Vec<Statevector<T>> = (0..n)
            .map(|q| {
                let mut l = phi.clone();
                l.apply_pauli(Axis::Z, q);
                l
            })
            .collect();
        let mut scratch = phi.clone();

        for gate in self.gates[first..].iter().rev() {
            if let Gate::Param { axis, qubit, index } = *gate {
                // d/dθ exp(-iθP/2)|ψ⟩ = -i/2 P|ψ_after⟩; 2 Re⟨λ|·⟩ = Im⟨λ|P ψ_after⟩
                scratch.amplitudes.copy_from_slice(&phi.amplitudes);
                scratch.apply_pauli(axis, qubit);
                for (q, lam) in lambdas.iter().enumerate() {
                    let v = jac.get(q, index) + lam.inner(&scratch).im;
                    jac.set(q, index, v);
                }
            }
            Self::apply_gate(&mut phi, gate, params, true);
            for lam in &mut lambdas {
                Self::apply_gate(lam, gate, params, true);
            }
        }
        Ok((readout, jac))
    }
}

/// Qubit-major angle matrix Θ of shape d×3; row `q` holds the (RX, RY, RZ)
/// angles for qubit `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleMatrix<T> {
    num_qubits: usize,
    data: Vec<T>,
}

impl<T: Real> AngleMatrix<T> {
    pub fn zeros(num_qubits: usize) -> Self {
        Self { num_qubits, data: vec![T::zero(); 3 * num_qubits] }
    }

    pub fn from_vec(num_qubits: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 3 * num_qubits {
            return Err(Error::invalid(format!(
                "angle matrix needs {}x3 = {} entries, got {}",
                num_qubits,
                3 * num_qubits,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("angle matrix entry is not finite"));
        }
        Ok(Self { num_qubits, data })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn get(&self, qubit: usize, col: usize) -> T {
        self.data[3 * qubit + col]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec<T> {
    num_qubits: usize,
    num_layers: usize,
    embedding: Vec<T>,
}

impl<T: Real> CircuitSpec<T> {
    pub fn new(num_qubits: usize, num_layers: usize, embedding: Vec<T>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if num_layers == 0 {
            return Err(Error::invalid("circuit needs at least one layer"));
        }
        if embedding.len() != num_qubits {
            return Err(Error::invalid(format!(
                "embedding has {} angles for {num_qubits} qubits",
                embedding.len()
            )));
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding angle is not finite"));
        }
        Ok(Self { num_qubits, num_layers, embedding })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn embedding(&self) -> &[T] {
        &self.embedding
    }

    /// RY embedding followed by `num_layers` copies of
    /// [RX, RY, RZ per qubit; CNOT ring], with Θ shared across layers.
    pub fn build(&self) -> Result<ParamCircuit<T>> {
        let d = self.num_qubits;
        let mut c = ParamCircuit::new(d, 3 * d)?;
        for (q, &a) in self.embedding.iter().enumerate() {
            c.fixed(Axis::Y, q, a)?;
        }
        for _ in 0..self.num_layers {
            for q in 0..d {
                c.param(Axis::X, q, 3 * q)?;
                c.param(Axis::Y, q, 3 * q + 1)?;
                c.param(Axis::Z, q, 3 * q + 2)?;
            }
            c.cnot_ring(1)?;
        }
        Ok(c)
    }

    fn check_theta(&self, theta: &AngleMatrix<T>) -> Result<()> {
        if theta.num_qubits() != self.num_qubits {
            return Err(Error::invalid(format!(
                "angle matrix is {}x3, circuit has {} qubits",
                theta.num_qubits(),
                self.num_qubits
            )));
        }
        Ok(())
    }
}

pub fn init_state<T: Real>(num_qubits: usize) -> Result<Statevector<T>> {
    Statevector::new(num_qubits)
}

/// Generator readout x̂ = (⟨Z_1⟩, …, ⟨Z_d⟩).
pub fn run_generator_circuit<T: Real>(spec: &CircuitSpec<T>, theta: &AngleMatrix<T>) -> Result<Vec<T>> {
    spec.check_theta(theta)?;
    spec.build()?.expectations(theta.as_slice())
}

/// Jacobian ∂x̂_q/∂Θ_{r,c}, shape d × 3d with column `3r + c`.
pub fn generator_gradient<T: Real>(spec: &CircuitSpec<T>, theta: &AngleMatrix<T>) -> Result<Matrix<T>> {
    Ok(generator_forward_and_gradient(spec, theta)?.1)
}

pub fn generator_forward_and_gradient<T: Real>(
    spec: &CircuitSpec<T>,
    theta: &AngleMatrix<T>,
) -> Result<(Vec<T>, Matrix<T>)> {
    spec.check_theta(theta)?;
    spec.build()?.expectations_and_jacobian(theta.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    #[test]
    fn init_state_is_ground() {
        let s = init_state::<f64>(1).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0), c(0.0)]);
        let s = init_state::<f64>(2).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let s = init_state::<f64>(4).unwrap();
        assert_eq!(s.amplitudes().len(), 16);
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0)));
    }

    #[test]
    fn init_state_rejects_out_of_range() {
        assert!(matches!(init_state::<f64>(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(init_state::<f64>(13), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = init_state::<f64>(1).unwrap();
        s.apply_rotation(Axis::Y, 0, PI).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.expval_z(0).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn rz_leaves_z_expectation() {
        for theta in [0.0, 0.3, 1.7, -2.9, 10.0] {
            let mut s = init_state::<f64>(1).unwrap();
            s.apply_rotation(Axis::Z, 0, theta).unwrap();
            assert_abs_diff_eq!(s.expval_z(0).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn ry_expectation_is_cosine() {
        let mut s = init_state::<f64>(1).unwrap();
        s.apply_rotation(Axis::Y, 0, 0.7).unwrap();
        // cos(0.7) = 0.764842187...
        assert_abs_diff_eq!(s.expval_z(0).unwrap(), 0.764_842_187_284_488_4, epsilon = 1e-12);
    }

    #[test]
    fn rotation_rejects_bad_qubit() {
        let mut s = init_state::<f64>(2).unwrap();
        assert!(s.apply_rotation(Axis::X, 2, 0.1).is_err());
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ is index 2 with qubit 0 as high bit
        let mut amps = vec![c(0.0); 4];
        amps[2] = c(1.0);
        let mut s = Statevector::from_amplitudes(2, amps).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0));

        let mut s = init_state::<f64>(2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
    }

    #[test]
    fn cnot_makes_bell_state() {
        let h = FRAC_1_SQRT_2;
        let mut s = Statevector::from_amplitudes(2, vec![c(h), c(0.0), c(h), c(0.0)]).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[c(h), c(0.0), c(0.0), c(h)]);
    }

    #[test]
    fn cnot_rejects_same_qubit() {
        let mut s = init_state::<f64>(2).unwrap();
        assert!(matches!(s.apply_cnot(1, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn expval_plus_state_is_zero() {
        let h = FRAC_1_SQRT_2;
        let s = Statevector::from_amplitudes(1, vec![c(h), c(h)]).unwrap();
        assert_abs_diff_eq!(s.expval_z(0).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(init_state::<f64>(1).unwrap().expval_z(0).unwrap(), 1.0);
    }

    #[test]
    fn identity_generator_circuit() {
        let spec = CircuitSpec::new(2, 1, vec![0.0, 0.0]).unwrap();
        let x = run_generator_circuit(&spec, &AngleMatrix::zeros(2)).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn single_qubit_generator_is_cosine() {
        for theta in [-1.2, 0.0, 0.4, 2.5] {
            let spec = CircuitSpec::new(1, 1, vec![theta]).unwrap();
            let x = run_generator_circuit(&spec, &AngleMatrix::zeros(1)).unwrap();
            assert_abs_diff_eq!(x[0], f64::cos(theta), epsilon = 1e-14);
        }
    }

    #[test]
    fn single_qubit_ry_gradient_is_minus_sine() {
        for theta in [-1.0, 0.25, 1.3] {
            let spec = CircuitSpec::new(1, 1, vec![0.0]).unwrap();
            let th = AngleMatrix::from_vec(1, vec![0.0, theta, 0.0]).unwrap();
            let j = generator_gradient(&spec, &th).unwrap();
            assert_abs_diff_eq!(j.get(0, 1), -f64::sin(theta), epsilon = 1e-14);
        }
    }

    #[test]
    fn rz_gradient_vanishes_at_ground_state() {
        for (d, l) in [(1, 1), (2, 3), (3, 2)] {
            let spec = CircuitSpec::new(d, l, vec![0.0; d]).unwrap();
            let j = generator_gradient(&spec, &AngleMatrix::zeros(d)).unwrap();
            for q in 0..d {
                assert_abs_diff_eq!(j.get(q, 3 * q + 2), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn spec_and_theta_shape_checks() {
        assert!(CircuitSpec::<f64>::new(2, 0, vec![0.0; 2]).is_err());
        assert!(CircuitSpec::<f64>::new(2, 1, vec![0.0; 3]).is_err());
        let spec = CircuitSpec::new(2, 1, vec![0.0; 2]).unwrap();
        assert!(run_generator_circuit(&spec, &AngleMatrix::zeros(3)).is_err());
        assert!(AngleMatrix::<f64>::from_vec(2, vec![0.0; 5]).is_err());
        assert!(AngleMatrix::from_vec(1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let spec = CircuitSpec::new(2, 2, vec![0.3f32, -0.4]).unwrap();
        let th = AngleMatrix::from_vec(2, vec![0.1f32, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let x32 = run_generator_circuit(&spec, &th).unwrap();
        let spec64 = CircuitSpec::new(2, 2, vec![0.3f64, -0.4]).unwrap();
        let th64 = AngleMatrix::from_vec(2, th.as_slice().iter().map(|&v| v as f64).collect()).unwrap();
        let x64 = run_generator_circuit(&spec64, &th64).unwrap();
        for (a, b) in x32.iter().zip(&x64) {
            assert!((*a as f64 - b).abs() < 1e-5);
        }
    }
}
