//! Gated recurrent units: single direction, bidirectional wrapper, and a
//! two-layer bidirectional stack.
//!
//! Gate convention (order r, z, n):
//!   r = σ(W_ir x + b_ir + W_hr h + b_hr)
//!   z = σ(W_iz x + b_iz + W_hz h + b_hz)
//!   n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//!   h' = (1 − z) ⊙ n + z ⊙ h
//! with the three gates stacked row-wise in w_ih (3H × D) and w_hh (3H × H).

use ndarray::{s, Array1, Array2, Array3, Axis};

use crate::core::SeededRng;
use crate::nn::act::sigmoid_scalar;
use crate::nn::module::{join, ParamVisitor, Params};

pub struct GruDirection {
    pub w_ih: Array2<f32>, // (3H, D)
    pub w_hh: Array2<f32>, // (3H, H)
    pub b_ih: Array1<f32>,
    pub b_hh: Array1<f32>,
    pub grad_w_ih: Array2<f32>,
    pub grad_w_hh: Array2<f32>,
    pub grad_b_ih: Array1<f32>,
    pub grad_b_hh: Array1<f32>,
    hidden: usize,
}

/// Per-timestep intermediates retained for backpropagation through time.
pub struct GruStepCache {
    h_prev: Array2<f32>, // (B, H)
    r: Array2<f32>,
    z: Array2<f32>,
    n: Array2<f32>,
    gh_n: Array2<f32>, // W_hn h + b_hn, before the reset gate
}

pub struct GruCache {
    steps: Vec<GruStepCache>,
}

impl GruDirection {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mat = |r: usize, c: usize, rng: &mut SeededRng| {
            Array2::from_shape_simple_fn((r, c), || rng.uniform_in(-bound, bound) as f32)
        };
        let w_ih = mat(3 * hidden, input_dim, rng);
        let w_hh = mat(3 * hidden, hidden, rng);
        let b_ih = Array1::from_shape_simple_fn(3 * hidden, || rng.uniform_in(-bound, bound) as f32);
        let b_hh = Array1::from_shape_simple_fn(3 * hidden, || rng.uniform_in(-bound, bound) as f32);
        GruDirection {
            grad_w_ih: Array2::zeros(w_ih.raw_dim()),
            grad_w_hh: Array2::zeros(w_hh.raw_dim()),
            grad_b_ih: Array1::zeros(3 * hidden),
            grad_b_hh: Array1::zeros(3 * hidden),
            w_ih,
            w_hh,
            b_ih,
            b_hh,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// x: (B, T, D) in the direction's own time order → (B, T, H).
    pub fn forward(&self, x: &Array3<f32>) -> (Array3<f32>, GruCache) {
        let (batch, t_len, _) = x.dim();
        let h_dim = self.hidden;
        let mut h = Array2::<f32>::zeros((batch, h_dim));
        let mut out = Array3::zeros((batch, t_len, h_dim));
        let mut steps = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let x_t = x.slice(s![.., t, ..]).to_owned(); // (B, D)
            let gates_x = x_t.dot(&self.w_ih.t()) + &self.b_ih; // (B, 3H)
            let gates_h = h.dot(&self.w_hh.t()) + &self.b_hh;
            let gx_r = gates_x.slice(s![.., 0..h_dim]);
            let gx_z = gates_x.slice(s![.., h_dim..2 * h_dim]);
            let gx_n = gates_x.slice(s![.., 2 * h_dim..3 * h_dim]);
            let gh_r = gates_h.slice(s![.., 0..h_dim]);
            let gh_z = gates_h.slice(s![.., h_dim..2 * h_dim]);
            let gh_n = gates_h.slice(s![.., 2 * h_dim..3 * h_dim]).to_owned();
            let r = ndarray::Zip::from(&gx_r).and(&gh_r).map_collect(|&a, &b| sigmoid_scalar(a + b));
            let z = ndarray::Zip::from(&gx_z).and(&gh_z).map_collect(|&a, &b| sigmoid_scalar(a + b));
            let n = ndarray::Zip::from(&gx_n)
                .and(&r)
                .and(&gh_n)
                .map_collect(|&a, &rv, &b| (a + rv * b).tanh());
            let h_new = ndarray::Zip::from(&z)
                .and(&n)
                .and(&h)
                .map_collect(|&zv, &nv, &hv| (1.0 - zv) * nv + zv * hv);
            out.slice_mut(s![.., t, ..]).assign(&h_new);
            steps.push(GruStepCache { h_prev: h, r, z, n, gh_n });
            h = h_new;
        }
        (out, GruCache { steps })
    }

    /// Backward through time. `x` is the same input given to `forward`;
    /// returns the input gradient and accumulates parameter gradients.
    pub fn backward(&mut self, x: &Array3<f32>, cache: &GruCache, gy: &Array3<f32>) -> Array3<f32> {
        let (batch, t_len, in_dim) = x.dim();
        let h_dim = self.hidden;
        let mut gx = Array3::zeros((batch, t_len, in_dim));
        let mut dh_next = Array2::<f32>::zeros((batch, h_dim));
        for t in (0..t_len).rev() {
            let step = &cache.steps[t];
            let dh = &gy.slice(s![.., t, ..]).to_owned() + &dh_next;
            let dz = ndarray::Zip::from(&dh)
                .and(&step.h_prev)
                .and(&step.n)
                .map_collect(|&g, &hp, &nv| g * (hp - nv));
            let dn = ndarray::Zip::from(&dh).and(&step.z).map_collect(|&g, &zv| g * (1.0 - zv));
            let mut dh_prev = ndarray::Zip::from(&dh).and(&step.z).map_collect(|&g, &zv| g * zv);
            let dn_pre =
                ndarray::Zip::from(&dn).and(&step.n).map_collect(|&g, &nv| g * (1.0 - nv * nv));
            let dr = ndarray::Zip::from(&dn_pre)
                .and(&step.gh_n)
                .map_collect(|&g, &b| g * b);
            let dgh_n = ndarray::Zip::from(&dn_pre).and(&step.r).map_collect(|&g, &rv| g * rv);
            let dz_pre = ndarray::Zip::from(&dz)
                .and(&step.z)
                .map_collect(|&g, &zv| g * zv * (1.0 - zv));
            let dr_pre = ndarray::Zip::from(&dr)
                .and(&step.r)
                .map_collect(|&g, &rv| g * rv * (1.0 - rv));
            // Stack gate gradients: input-side uses dn_pre for n, hidden-side dgh_n.
            let mut dgates_x = Array2::<f32>::zeros((batch, 3 * h_dim));
            dgates_x.slice_mut(s![.., 0..h_dim]).assign(&dr_pre);
            dgates_x.slice_mut(s![.., h_dim..2 * h_dim]).assign(&dz_pre);
            dgates_x.slice_mut(s![.., 2 * h_dim..3 * h_dim]).assign(&dn_pre);
            let mut dgates_h = Array2::<f32>::zeros((batch, 3 * h_dim));
            dgates_h.slice_mut(s![.., 0..h_dim]).assign(&dr_pre);
            dgates_h.slice_mut(s![.., h_dim..2 * h_dim]).assign(&dz_pre);
            dgates_h.slice_mut(s![.., 2 * h_dim..3 * h_dim]).assign(&dgh_n);

            let x_t = x.slice(s![.., t, ..]).to_owned();
            gx.slice_mut(s![.., t, ..]).assign(&dgates_x.dot(&self.w_ih));
            dh_prev += &dgates_h.dot(&self.w_hh);
            self.grad_w_ih += &dgates_x.t().dot(&x_t);
            self.grad_w_hh += &dgates_h.t().dot(&step.h_prev);
            self.grad_b_ih += &dgates_x.sum_axis(Axis(0));
            self.grad_b_hh += &dgates_h.sum_axis(Axis(0));
            dh_next = dh_prev;
        }
        gx
    }
}

impl Params for GruDirection {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        f(
            &join(prefix, "w_ih"),
            self.w_ih.view_mut().into_dyn(),
            self.grad_w_ih.view_mut().into_dyn(),
        );
        f(
            &join(prefix, "w_hh"),
            self.w_hh.view_mut().into_dyn(),
            self.grad_w_hh.view_mut().into_dyn(),
        );
        f(
            &join(prefix, "b_ih"),
            self.b_ih.view_mut().into_dyn(),
            self.grad_b_ih.view_mut().into_dyn(),
        );
        f(
            &join(prefix, "b_hh"),
            self.b_hh.view_mut().into_dyn(),
            self.grad_b_hh.view_mut().into_dyn(),
        );
    }
}

/// One bidirectional layer: forward and reversed passes, outputs
/// concatenated to (B, T, 2H).
pub struct BiGru {
    pub fwd: GruDirection,
    pub bwd: GruDirection,
}

pub struct BiGruCache {
    fwd: GruCache,
    bwd: GruCache,
    x_rev: Array3<f32>,
}

fn reverse_time(x: &Array3<f32>) -> Array3<f32> {
    let mut out = x.clone();
    out.invert_axis(Axis(1));
    out
}

impl BiGru {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        BiGru {
            fwd: GruDirection::new(input_dim, hidden, rng),
            bwd: GruDirection::new(input_dim, hidden, rng),
        }
    }

    pub fn forward(&self, x: &Array3<f32>) -> (Array3<f32>, BiGruCache) {
        let (batch, t_len, _) = x.dim();
        let h = self.fwd.hidden();
        let (y_f, c_f) = self.fwd.forward(x);
        let x_rev = reverse_time(x);
        let (y_b_rev, c_b) = self.bwd.forward(&x_rev);
        let y_b = reverse_time(&y_b_rev);
        let mut out = Array3::zeros((batch, t_len, 2 * h));
        out.slice_mut(s![.., .., 0..h]).assign(&y_f);
        out.slice_mut(s![.., .., h..2 * h]).assign(&y_b);
        (out, BiGruCache { fwd: c_f, bwd: c_b, x_rev })
    }

    pub fn backward(&mut self, x: &Array3<f32>, cache: &BiGruCache, gy: &Array3<f32>) -> Array3<f32> {
        let h = self.fwd.hidden();
        let gy_f = gy.slice(s![.., .., 0..h]).to_owned();
        let gy_b = reverse_time(&gy.slice(s![.., .., h..2 * h]).to_owned());
        let gx_f = self.fwd.backward(x, &cache.fwd, &gy_f);
        let gx_b_rev = self.bwd.backward(&cache.x_rev, &cache.bwd, &gy_b);
        gx_f + reverse_time(&gx_b_rev)
    }
}

impl Params for BiGru {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.fwd.visit_params(&join(prefix, "fwd"), f);
        self.bwd.visit_params(&join(prefix, "bwd"), f);
    }
}

/// Two stacked bidirectional layers; output dimension is 2·hidden.
pub struct BiGruStack {
    pub layer1: BiGru,
    pub layer2: BiGru,
}

pub struct BiGruStackCache {
    c1: BiGruCache,
    mid: Array3<f32>,
    c2: BiGruCache,
}

impl BiGruStack {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        BiGruStack {
            layer1: BiGru::new(input_dim, hidden, rng),
            layer2: BiGru::new(2 * hidden, hidden, rng),
        }
    }

    pub fn forward(&self, x: &Array3<f32>) -> (Array3<f32>, BiGruStackCache) {
        let (mid, c1) = self.layer1.forward(x);
        let (out, c2) = self.layer2.forward(&mid);
        (out, BiGruStackCache { c1, mid, c2 })
    }

    pub fn backward(
        &mut self,
        x: &Array3<f32>,
        cache: &BiGruStackCache,
        gy: &Array3<f32>,
    ) -> Array3<f32> {
        let g_mid = self.layer2.backward(&cache.mid, &cache.c2, gy);
        self.layer1.backward(x, &cache.c1, &g_mid)
    }
}

impl Params for BiGruStack {
    fn visit_params(&mut self, prefix: &str, f: ParamVisitor<'_>) {
        self.layer1.visit_params(&join(prefix, "layer1"), f);
        self.layer2.visit_params(&join(prefix, "layer2"), f);
    }
}
