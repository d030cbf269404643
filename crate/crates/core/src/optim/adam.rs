use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of `genes` in place; frozen slots are left
    /// alone and the result is clamped to [0, 1].
    pub fn step(&mut self, genes: &mut [f64], grad: &[f64], frozen: &[bool]) {
        assert_eq!(genes.len(), grad.len(), "gene and gradient lengths differ");
        assert_eq!(genes.len(), self.m.len(), "optimizer state has the wrong length");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..genes.len() {
            if frozen.get(i).copied().unwrap_or(false) {
                continue;
            }
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            genes[i] = (genes[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps)).clamp(0.0, 1.0);
        }
    }
}

pub fn adam_step(state: &AdamState, genes: &[f64], grad: &[f64], frozen: &[bool]) -> (AdamState, Vec<f64>) {
    let mut next = state.clone();
    let mut out = genes.to_vec();
    next.step(&mut out, grad, frozen);
    (next, out)
}
