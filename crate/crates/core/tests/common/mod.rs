//! Independent references for the Liouville-space formulas: waiting-time
//! integrals done by adaptive Gauss-Kronrod quadrature over explicit Kraus
//! operators `Y(w,m) = L_m e^{-i H_eff w}`.

#![allow(dead_code)]

use qfpt_core::linalg::eigenvalues;
use qfpt_core::liouville::{expm_pade, kron_lift};
use qfpt_core::rng::substream;
use qfpt_core::{random_system, CMatrix, LindbladSystem, C64};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> CMatrix, a: f64, b: f64) -> (CMatrix, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let center = f(c);
    let mut kronrod = &center * C64::new(WGK[7], 0.0);
    let mut gauss = &center * C64::new(WG[3], 0.0);
    for j in 0..7 {
        let x = h * XGK[j];
        let sum = f(c - x) + f(c + x);
        kronrod += &sum * C64::new(WGK[j], 0.0);
        if j % 2 == 1 {
            gauss += &sum * C64::new(WG[j / 2], 0.0);
        }
    }
    let k = kronrod * C64::new(h, 0.0);
    let g = gauss * C64::new(h, 0.0);
    let err = (&k - g).norm();
    (k, err)
}

fn adaptive(f: &dyn Fn(f64) -> CMatrix, a: f64, b: f64, tol: f64, depth: usize) -> CMatrix {
    let (value, err) = gk15(f, a, b);
    let floor = 50.0 * f64::EPSILON * value.norm();
    if err <= tol.max(floor) || depth == 0 {
        return value;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_0^∞ f(w) dw` for an integrand decaying at least like `e^{-rate w}`.
pub fn integrate_half_line(f: &dyn Fn(f64) -> CMatrix, rate: f64, tol: f64) -> CMatrix {
    let scale = 1.0 / rate;
    let pieces = 60;
    let mut total = f(0.0) * C64::new(0.0, 0.0);
    for i in 0..pieces {
        let a = i as f64 * scale;
        total += adaptive(f, a, a + scale, tol / pieces as f64, 20);
    }
    total
}

/// Slowest decay rate of `‖e^{-i H_eff w}‖`.
pub fn decay_rate(sys: &LindbladSystem) -> f64 {
    let gen = sys.effective_hamiltonian() * C64::new(0.0, -1.0);
    -eigenvalues(&gen)
        .expect("eigenvalues")
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn no_jump(sys: &LindbladSystem, w: f64) -> CMatrix {
    expm_pade(&(sys.effective_hamiltonian() * C64::new(0.0, -w)))
}

/// `Σ_m ∫ w^p (Y⋆(w,m)^* ⊗ Y(w,m)) dw`.
pub fn lifted_moment(orig: &LindbladSystem, pert: &LindbladSystem, power: i32) -> CMatrix {
    let f = |w: f64| {
        let u = no_jump(orig, w);
        let v = no_jump(pert, w);
        let d2 = orig.dim() * orig.dim();
        let mut acc = CMatrix::zeros(d2, d2);
        for (l, lp) in orig.jumps().iter().zip(pert.jumps()) {
            acc += kron_lift(&(lp * &v).conjugate(), &(l * &u));
        }
        acc * C64::new(w.powi(power), 0.0)
    };
    let rate = decay_rate(orig) + decay_rate(pert);
    integrate_half_line(&f, rate, 1e-12)
}

/// `n` random valid systems with `d ∈ {2,3,4}` and one to three channels.
pub fn random_systems(seed: u64, n: usize) -> Vec<LindbladSystem> {
    let mut rng = substream(seed, 0);
    (0..n)
        .map(|i| random_system(&mut rng, 2 + i % 3, 1 + i % 3))
        .collect()
}
