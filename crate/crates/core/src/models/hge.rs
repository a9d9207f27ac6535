//! Hierarchical graph embedding layers on top of matrix factorisation.
//!
//! One layer per hierarchy level. For category `c` with member set `M_c`,
//! item `j` gets the raw score `s_j = <w1[c], w2[j]>`. The activation is
//! applied and the result goes through a softmax over `M_c` in which
//! ReLU-zeroed entries are gated out. The category embedding is
//! `g_c = sum_j a_j * e[j]`, and the layer's output row for every member of
//! `c` is `g_c`. With a skip connection the model adds the input back:
//! `e <- e + layer(e)`.
//!
//! This is one reading of the dense formula `I * SoftMax(ReLU(G W1 W2^T))`:
//! the product `G W1` picks the category key `w1[c]` of each item, the score
//! is taken against every member's key `w2[j]`, and softmax is normalised
//! within the category block. It is the reading under which a layer has
//! exactly `(I + K) * h` parameters, its output is a weighted sum of input
//! item embeddings, and ReLU can remove an item from its category's
//! embedding entirely. The unmasked variant normalises over all items
//! instead and is kept as an ablation switch.
//!
//! Nothing of size `I x I` is ever built: a masked layer costs
//! `O(I * (h + d))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grad::{GradBlock, GradientModel};
use super::mf::MfModel;
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, softmax_into, Activation, DenseMatrix, Real, SparseIncidence};

/// Ablation switches of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerOptions {
    pub activation: Activation,
    pub skip: bool,
    /// Normalise within the category block (`true`) or over all items.
    pub masked_softmax: bool,
}

impl Default for LayerOptions {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            skip: true,
            masked_softmax: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HgeLayer<T: Real = f32> {
    /// 1-based hierarchy level; 1 is the finest.
    pub level: usize,
    pub incidence: SparseIncidence,
    /// Category keys, `K x h`.
    pub w1: DenseMatrix<T>,
    /// Item keys, `I x h`.
    pub w2: DenseMatrix<T>,
    pub options: LayerOptions,
}

/// Per-category intermediate values of one layer's forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T: Real> {
    /// `offsets[c]..offsets[c + 1]` indexes category `c` in the flat arrays.
    offsets: Vec<usize>,
    support: Vec<usize>,
    raw: Vec<T>,
    weights: Vec<T>,
    /// `K x d`.
    pub category_embeddings: DenseMatrix<T>,
}

impl<T: Real> LayerCache<T> {
    /// Softmax weights of category `c` over its support, as `(item, weight)`.
    pub fn weights(&self, c: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.offsets[c]..self.offsets[c + 1];
        self.support[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }
}

impl<T: Real> HgeLayer<T> {
    pub fn new(
        level: usize,
        incidence: SparseIncidence,
        w1: DenseMatrix<T>,
        w2: DenseMatrix<T>,
        options: LayerOptions,
    ) -> Result<Self> {
        options.activation.validate()?;
        if w1.rows() != incidence.n_categories() || w2.rows() != incidence.n_items() {
            return Err(Error::Shape(format!(
                "layer at level {level}: w1 is {:?} and w2 is {:?} for {} categories over {} items",
                w1.shape(),
                w2.shape(),
                incidence.n_categories(),
                incidence.n_items()
            )));
        }
        if w1.cols() != w2.cols() || w1.cols() == 0 {
            return Err(Error::Shape(format!(
                "hidden sizes of w1 ({}) and w2 ({}) must match and be >= 1",
                w1.cols(),
                w2.cols()
            )));
        }
        Ok(Self {
            level,
            incidence,
            w1,
            w2,
            options,
        })
    }

    /// `w1` uniform in `[0, 0.01]`, `w2` uniform in `[-0.01, 0.01]`.
    pub fn random<R: Rng + ?Sized>(
        level: usize,
        incidence: SparseIncidence,
        hidden: usize,
        options: LayerOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let w1 = DenseMatrix::uniform(incidence.n_categories(), hidden, 0.0, 0.01, rng);
        let w2 = DenseMatrix::uniform(incidence.n_items(), hidden, -0.01, 0.01, rng);
        Self::new(level, incidence, w1, w2, options)
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_items(&self) -> usize {
        self.incidence.n_items()
    }

    pub fn n_categories(&self) -> usize {
        self.incidence.n_categories()
    }

    /// `(I + K) * h`.
    pub fn param_count(&self) -> usize {
        (self.n_items() + self.n_categories()) * self.hidden()
    }

    fn support_of<'a>(&'a self, c: usize, all: &'a [usize]) -> &'a [usize] {
        if self.options.masked_softmax {
            self.incidence.members(c)
        } else {
            all
        }
    }

    /// Category embeddings of `e` and the values needed to differentiate
    /// them. The layer output row of item `i` is row `category_of(i)`.
    pub fn forward_cached(&self, e: &DenseMatrix<T>) -> Result<LayerCache<T>> {
        if e.rows() != self.n_items() {
            return Err(Error::Shape(format!(
                "layer at level {} expects {} item rows, got {}",
                self.level,
                self.n_items(),
                e.rows()
            )));
        }
        let all: Vec<usize> = if self.options.masked_softmax {
            Vec::new()
        } else {
            (0..self.n_items()).collect()
        };
        let act = self.options.activation;
        let k = self.n_categories();
        let mut offsets = Vec::with_capacity(k + 1);
        let mut support = Vec::new();
        let mut raw = Vec::new();
        let mut weights = Vec::new();
        let mut activated = Vec::new();
        let mut g = DenseMatrix::zeros(k, e.cols());
        offsets.push(0);
        for c in 0..k {
            let key = self.w1.row(c);
            let sup = self.support_of(c, &all);
            let start = raw.len();
            activated.clear();
            for &j in sup {
                let s = dot(key, self.w2.row(j));
                raw.push(s);
                activated.push(act.apply(s));
            }
            weights.resize(raw.len(), T::zero());
            softmax_into(&activated, act.gates(), &mut weights[start..]);
            let gc = g.row_mut(c);
            for (&j, &a) in sup.iter().zip(&weights[start..]) {
                if a != T::zero() {
                    axpy(a, e.row(j), gc);
                }
            }
            support.extend_from_slice(sup);
            offsets.push(raw.len());
        }
        Ok(LayerCache {
            offsets,
            support,
            raw,
            weights,
            category_embeddings: g,
        })
    }

    /// The layer term alone (`I x d`), without the skip addition.
    pub fn forward(&self, e: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let cache = self.forward_cached(e)?;
        Ok(self.broadcast(&cache.category_embeddings))
    }

    fn broadcast(&self, g: &DenseMatrix<T>) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.n_items(), g.cols());
        for i in 0..self.n_items() {
            out.row_mut(i).copy_from_slice(g.row(self.incidence.category_of(i)));
        }
        out
    }

    /// Backpropagates through `e <- skip * e + layer(e)` in place: `grad`
    /// holds the gradient w.r.t. the output on entry and w.r.t. the input `e`
    /// on return. Key gradients are accumulated into `d_w1` / `d_w2`.
    pub fn backward(
        &self,
        e: &DenseMatrix<T>,
        cache: &LayerCache<T>,
        grad: &mut DenseMatrix<T>,
        d_w1: &mut GradBlock<T>,
        d_w2: &mut GradBlock<T>,
    ) {
        let act = self.options.activation;
        let d = e.cols();
        // dg_c = sum of the output gradients of the members of c
        let mut dg = DenseMatrix::zeros(self.n_categories(), d);
        for i in 0..self.n_items() {
            axpy(T::one(), grad.row(i), dg.row_mut(self.incidence.category_of(i)));
        }
        if !self.options.skip {
            grad.as_mut_slice().iter_mut().for_each(|x| *x = T::zero());
        }
        let mut dz = Vec::new();
        for c in 0..self.n_categories() {
            let dgc = dg.row(c);
            if dgc.iter().all(|x| *x == T::zero()) {
                continue;
            }
            let r = cache.offsets[c]..cache.offsets[c + 1];
            let sup = &cache.support[r.clone()];
            let a = &cache.weights[r.clone()];
            let raw = &cache.raw[r];
            // da_j = <dg, e_j>; softmax backward dz_j = a_j (da_j - sum_k a_k da_k)
            dz.clear();
            let mut mean = T::zero();
            for (&j, &aj) in sup.iter().zip(a) {
                let da = if aj != T::zero() { dot(dgc, e.row(j)) } else { T::zero() };
                mean = mean + aj * da;
                dz.push(da);
            }
            for ((&j, &aj), dzj) in sup.iter().zip(a).zip(dz.iter_mut()) {
                if aj == T::zero() {
                    *dzj = T::zero();
                    continue;
                }
                axpy(aj, dgc, grad.row_mut(j));
                *dzj = aj * (*dzj - mean);
            }
            for ((&j, &s), &dzj) in sup.iter().zip(raw).zip(&dz) {
                let ds = dzj * act.derivative(s);
                if ds == T::zero() {
                    continue;
                }
                d_w1.add_row(c, ds, self.w2.row(j));
                d_w2.add_row(j, ds, self.w1.row(c));
            }
        }
    }
}

/// Matrix factorisation whose item embeddings pass through a stack of HGE
/// layers, finest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct HgeModel<T: Real = f32> {
    pub base: MfModel<T>,
    pub layers: Vec<HgeLayer<T>>,
}

/// Forward values of every layer for one parameter state.
#[derive(Debug, Clone)]
pub struct HgeForward<T: Real> {
    /// Output of each layer after its skip connection.
    pub outputs: Vec<DenseMatrix<T>>,
    pub caches: Vec<LayerCache<T>>,
}

/// Gradients of every parameter block of an [`HgeModel`].
#[derive(Debug, Clone)]
pub struct HgeGradients<T: Real> {
    pub users: DenseMatrix<T>,
    pub items: DenseMatrix<T>,
    /// `(d_w1, d_w2)` per layer.
    pub layers: Vec<(DenseMatrix<T>, DenseMatrix<T>)>,
}

impl<T: Real> HgeModel<T> {
    pub fn new(base: MfModel<T>, layers: Vec<HgeLayer<T>>) -> Result<Self> {
        for w in layers.windows(2) {
            if w[1].level <= w[0].level {
                return Err(Error::Parameter(format!(
                    "layer levels must increase, got {} then {}",
                    w[0].level, w[1].level
                )));
            }
        }
        if let Some(l) = layers.iter().find(|l| l.n_items() != base.n_items()) {
            return Err(Error::Shape(format!(
                "layer at level {} covers {} items, model has {}",
                l.level,
                l.n_items(),
                base.n_items()
            )));
        }
        Ok(Self { base, layers })
    }

    /// Random base embeddings and one randomly initialised layer per incidence.
    pub fn random<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        d: usize,
        hidden: usize,
        levels: &[SparseIncidence],
        options: &[LayerOptions],
        rng: &mut R,
    ) -> Result<Self> {
        if options.len() != levels.len() {
            return Err(Error::Parameter(format!(
                "{} layer option sets for {} levels",
                options.len(),
                levels.len()
            )));
        }
        let base = MfModel::random(n_users, n_items, d, rng);
        let layers = levels
            .iter()
            .zip(options)
            .enumerate()
            .map(|(l, (g, o))| HgeLayer::random(l + 1, g.clone(), hidden, *o, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, layers)
    }

    pub fn n_users(&self) -> usize {
        self.base.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.base.n_items()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `(|U| + I) * d + sum_l (I + K_l) * h`.
    pub fn param_count(&self) -> usize {
        self.base.param_count() + self.layers.iter().map(HgeLayer::param_count).sum::<usize>()
    }

    pub fn forward(&self) -> HgeForward<T> {
        let mut outputs: Vec<DenseMatrix<T>> = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let e = outputs.last().unwrap_or(&self.base.item_embeddings);
            let cache = layer
                .forward_cached(e)
                .expect("layer shapes are checked at construction");
            let g = &cache.category_embeddings;
            let mut out = if layer.options.skip {
                e.clone()
            } else {
                DenseMatrix::zeros(e.rows(), e.cols())
            };
            for i in 0..e.rows() {
                axpy(T::one(), g.row(layer.incidence.category_of(i)), out.row_mut(i));
            }
            outputs.push(out);
            caches.push(cache);
        }
        HgeForward { outputs, caches }
    }

    /// Item embeddings of a forward pass.
    pub fn final_embeddings<'a>(&'a self, fwd: &'a HgeForward<T>) -> &'a DenseMatrix<T> {
        fwd.outputs.last().unwrap_or(&self.base.item_embeddings)
    }

    /// Final item embeddings after all layers.
    pub fn item_embeddings(&self) -> DenseMatrix<T> {
        if self.layers.is_empty() {
            return self.base.item_embeddings.clone();
        }
        self.forward().outputs.pop().unwrap()
    }

    pub fn score(&self, user: usize, item: usize) -> Result<T> {
        let e = self.item_embeddings();
        if user >= self.n_users() || item >= self.n_items() {
            return Err(Error::Parameter(format!(
                "pair ({user}, {item}) out of range for {} users and {} items",
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(dot(self.base.user_embeddings.row(user), e.row(item)))
    }

    /// Backpropagates the gradient w.r.t. the final item embeddings, held in
    /// `grads[1]`, down to the base table. Block order matches
    /// [`GradientModel::blocks`].
    fn backward_items(&self, fwd: &HgeForward<T>, grads: &mut [GradBlock<T>]) {
        let (head, keys) = grads.split_at_mut(2);
        let items = &mut head[1];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = if l == 0 { &self.base.item_embeddings } else { &fwd.outputs[l - 1] };
            let (w1, w2) = keys[2 * l..2 * l + 2].split_at_mut(1);
            layer.backward(input, &fwd.caches[l], &mut items.grad, &mut w1[0], &mut w2[0]);
        }
        items.touch_nonzero_rows();
    }
}

/// Gradients of `sum_k dscores[k] * score(pairs[k])` w.r.t. every parameter.
pub fn hge_backward<T: Real>(
    model: &HgeModel<T>,
    pairs: &[(u32, u32)],
    dscores: &[T],
) -> HgeGradients<T> {
    let fwd = model.forward();
    let mut grads = model.new_grads();
    model.backward_batch(&fwd, pairs, dscores, &mut grads);
    let mut it = grads.into_iter().map(|g| g.grad);
    let users = it.next().unwrap();
    let items = it.next().unwrap();
    let mut layers = Vec::new();
    while let (Some(a), Some(b)) = (it.next(), it.next()) {
        layers.push((a, b));
    }
    HgeGradients {
        users,
        items,
        layers,
    }
}

impl<T: Real> GradientModel<T> for HgeModel<T> {
    type Cache = HgeForward<T>;

    /// Users, base items, then `w1`, `w2` of each layer.
    fn blocks(&self) -> Vec<&DenseMatrix<T>> {
        let mut out = vec![&self.base.user_embeddings, &self.base.item_embeddings];
        for l in &self.layers {
            out.push(&l.w1);
            out.push(&l.w2);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let mut out = vec![&mut self.base.user_embeddings, &mut self.base.item_embeddings];
        for l in &mut self.layers {
            out.push(&mut l.w1);
            out.push(&mut l.w2);
        }
        out
    }

    fn forward_batch(&self, pairs: &[(u32, u32)]) -> (Vec<T>, HgeForward<T>) {
        let fwd = self.forward();
        let e = self.final_embeddings(&fwd);
        let scores = pairs
            .iter()
            .map(|&(u, i)| dot(self.base.user_embeddings.row(u as usize), e.row(i as usize)))
            .collect();
        (scores, fwd)
    }

    fn backward_batch(
        &self,
        fwd: &HgeForward<T>,
        pairs: &[(u32, u32)],
        dscores: &[T],
        grads: &mut [GradBlock<T>],
    ) {
        let e = self.final_embeddings(fwd);
        let (gu, rest) = grads.split_at_mut(1);
        for (&(u, i), &ds) in pairs.iter().zip(dscores) {
            gu[0].add_row(u as usize, ds, e.row(i as usize));
            rest[0].add_row(i as usize, ds, self.base.user_embeddings.row(u as usize));
        }
        if !self.layers.is_empty() {
            self.backward_items(fwd, grads);
        }
    }
}
