//! Reverse-mode automatic differentiation over a flat Wengert list.
//!
//! Every node stores its value and the local partial derivative with respect to
//! each parent. N-ary nodes (dot products, sums, log-sum-exp) keep their parent
//! lists contiguous in a shared buffer, so a `d`-dimensional dot product costs a
//! single node instead of `2d` binary ones.

use std::cell::RefCell;

use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Default)]
struct Nodes<F> {
    values: Vec<F>,
    /// `(start, len)` into `parents` / `partials`.
    spans: Vec<(u32, u32)>,
    parents: Vec<u32>,
    partials: Vec<F>,
}

/// Append-only computation record. Operations take `&self` so expressions nest.
pub struct Tape<F> {
    nodes: RefCell<Nodes<F>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Nodes {
                values: Vec::new(),
                spans: Vec::new(),
                parents: Vec::new(),
                partials: Vec::new(),
            }),
        }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        Self {
            nodes: RefCell::new(Nodes {
                values: Vec::with_capacity(nodes),
                spans: Vec::with_capacity(nodes),
                parents: Vec::with_capacity(edges),
                partials: Vec::with_capacity(edges),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().values.len()
    }

    /// Total number of recorded parent edges.
    pub fn edge_count(&self) -> usize {
        self.nodes.borrow().parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push<I>(&self, value: F, edges: I) -> Var
    where
        I: IntoIterator<Item = (Var, F)>,
    {
        let mut n = self.nodes.borrow_mut();
        let start = n.parents.len() as u32;
        for (p, d) in edges {
            n.parents.push(p.0);
            n.partials.push(d);
        }
        let len = n.parents.len() as u32 - start;
        let id = n.values.len() as u32;
        n.values.push(value);
        n.spans.push((start, len));
        Var(id)
    }

    /// Independent input. Gradients are reported for it.
    pub fn leaf(&self, value: F) -> Var {
        self.push(value, std::iter::empty())
    }

    /// Constant input; structurally identical to a leaf but named for intent.
    pub fn constant(&self, value: F) -> Var {
        self.push(value, std::iter::empty())
    }

    /// Cuts the gradient path: same value, no parents.
    pub fn detach(&self, v: Var) -> Var {
        self.constant(self.value(v))
    }

    pub fn value(&self, v: Var) -> F {
        self.nodes.borrow().values[v.index()]
    }

    pub fn values(&self, vs: &[Var]) -> Vec<F> {
        let n = self.nodes.borrow();
        vs.iter().map(|v| n.values[v.index()]).collect()
    }

    pub fn constants(&self, xs: &[F]) -> Vec<Var> {
        xs.iter().map(|&x| self.constant(x)).collect()
    }

    pub fn leaves(&self, xs: &[F]) -> Vec<Var> {
        xs.iter().map(|&x| self.leaf(x)).collect()
    }

    // ---- scalar ops -------------------------------------------------------

    pub fn add(&self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, [(a, F::one()), (b, F::one())])
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, [(a, F::one()), (b, -F::one())])
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, [(a, y), (b, x)])
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x / y, [(a, F::one() / y), (b, -x / (y * y))])
    }

    pub fn neg(&self, a: Var) -> Var {
        self.push(-self.value(a), [(a, -F::one())])
    }

    pub fn scale(&self, a: Var, c: F) -> Var {
        self.push(self.value(a) * c, [(a, c)])
    }

    pub fn add_const(&self, a: Var, c: F) -> Var {
        self.push(self.value(a) + c, [(a, F::one())])
    }

    pub fn square(&self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x * x, [(a, x + x)])
    }

    pub fn exp(&self, a: Var) -> Var {
        let y = self.value(a).exp();
        self.push(y, [(a, y)])
    }

    pub fn ln(&self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), [(a, F::one() / x)])
    }

    pub fn sqrt(&self, a: Var) -> Var {
        let y = self.value(a).sqrt();
        self.push(y, [(a, F::of(0.5) / y)])
    }

    pub fn tanh(&self, a: Var) -> Var {
        let y = self.value(a).tanh();
        self.push(y, [(a, F::one() - y * y)])
    }

    /// Cut-off at zero, `[x]_+`. The derivative at exactly zero is taken as 0.
    pub fn relu(&self, a: Var) -> Var {
        let x = self.value(a);
        if x > F::zero() {
            self.push(x, [(a, F::one())])
        } else {
            self.push(F::zero(), [(a, F::zero())])
        }
    }

    /// `log(1 + e^x)` evaluated without overflow.
    pub fn softplus(&self, a: Var) -> Var {
        let x = self.value(a);
        let y = x.max(F::zero()) + (-x.abs()).exp().ln_1p();
        let sig = if x >= F::zero() {
            F::one() / (F::one() + (-x).exp())
        } else {
            let e = x.exp();
            e / (F::one() + e)
        };
        self.push(y, [(a, sig)])
    }

    // ---- n-ary ops --------------------------------------------------------

    pub fn sum(&self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        self.push(v, xs.iter().map(|&x| (x, F::one())))
    }

    pub fn mean(&self, xs: &[Var]) -> Var {
        let w = F::one() / F::from_usize(xs.len()).expect("length fits");
        let v = xs.iter().map(|&x| self.value(x)).sum::<F>() * w;
        self.push(v, xs.iter().map(|&x| (x, w)))
    }

    /// `Σ c_i x_i` with constant coefficients.
    pub fn linear(&self, xs: &[Var], coeffs: &[F]) -> Var {
        debug_assert_eq!(xs.len(), coeffs.len());
        let v = xs
            .iter()
            .zip(coeffs)
            .map(|(&x, &c)| self.value(x) * c)
            .sum();
        self.push(v, xs.iter().copied().zip(coeffs.iter().copied()))
    }

    pub fn dot(&self, a: &[Var], b: &[Var]) -> Var {
        debug_assert_eq!(a.len(), b.len());
        let (va, vb) = (self.values(a), self.values(b));
        let v = va.iter().zip(&vb).map(|(&x, &y)| x * y).sum();
        let edges = a
            .iter()
            .zip(vb.iter())
            .map(|(&x, &dy)| (x, dy))
            .chain(b.iter().zip(va.iter()).map(|(&y, &dx)| (y, dx)))
            .collect::<Vec<_>>();
        self.push(v, edges)
    }

    /// Stable `log Σ exp(x_i)`. Panics on an empty slice.
    pub fn log_sum_exp(&self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty(), "log_sum_exp of empty set");
        let vals = self.values(xs);
        let m = vals.iter().copied().fold(F::neg_infinity(), F::max);
        let exps: Vec<F> = vals.iter().map(|&x| (x - m).exp()).collect();
        let z: F = exps.iter().copied().sum();
        let v = m + z.ln();
        self.push(v, xs.iter().zip(exps).map(|(&x, e)| (x, e / z)))
    }

    /// `log softmax(xs)[k]`.
    pub fn log_softmax_at(&self, xs: &[Var], k: usize) -> Var {
        let lse = self.log_sum_exp(xs);
        self.sub(xs[k], lse)
    }

    pub fn softmax(&self, xs: &[Var]) -> Vec<Var> {
        let lse = self.log_sum_exp(xs);
        xs.iter().map(|&x| self.exp(self.sub(x, lse))).collect()
    }

    // ---- vector helpers ---------------------------------------------------

    pub fn vadd(&self, a: &[Var], b: &[Var]) -> Vec<Var> {
        a.iter().zip(b).map(|(&x, &y)| self.add(x, y)).collect()
    }

    pub fn vtanh(&self, a: &[Var]) -> Vec<Var> {
        a.iter().map(|&x| self.tanh(x)).collect()
    }

    /// Row-major `rows x cols` matrix times vector.
    pub fn matvec(&self, w: &[Var], rows: usize, x: &[Var]) -> Vec<Var> {
        let cols = x.len();
        debug_assert_eq!(w.len(), rows * cols);
        (0..rows)
            .map(|r| self.dot(&w[r * cols..(r + 1) * cols], x))
            .collect()
    }

    pub fn affine(&self, w: &[Var], b: &[Var], x: &[Var]) -> Vec<Var> {
        let y = self.matvec(w, b.len(), x);
        self.vadd(&y, b)
    }

    /// Element-wise mean of equally sized vectors.
    pub fn mean_vectors(&self, vs: &[&[Var]]) -> Vec<Var> {
        assert!(!vs.is_empty(), "mean of zero vectors");
        let d = vs[0].len();
        let mut col = Vec::with_capacity(vs.len());
        (0..d)
            .map(|i| {
                col.clear();
                col.extend(vs.iter().map(|v| v[i]));
                self.mean(&col)
            })
            .collect()
    }

    /// `Σ_k c_k v_k` over equally sized vectors with constant weights.
    pub fn combine_vectors(&self, vs: &[&[Var]], coeffs: &[F]) -> Vec<Var> {
        let d = vs[0].len();
        let mut col = Vec::with_capacity(vs.len());
        (0..d)
            .map(|i| {
                col.clear();
                col.extend(vs.iter().map(|v| v[i]));
                self.linear(&col, coeffs)
            })
            .collect()
    }

    /// `Σ_k w_k v_k` with differentiable weights.
    pub fn weighted_vectors(&self, vs: &[&[Var]], weights: &[Var]) -> Vec<Var> {
        let d = vs[0].len();
        let mut col = Vec::with_capacity(vs.len());
        (0..d)
            .map(|i| {
                col.clear();
                col.extend(vs.iter().map(|v| v[i]));
                self.dot(&col, weights)
            })
            .collect()
    }

    /// L2 normalisation. Inputs with norm below `1e-8` map to the constant `e_1`.
    pub fn normalize(&self, x: &[Var]) -> Vec<Var> {
        let sq = self.dot(x, x);
        let norm = self.value(sq).sqrt();
        if norm < F::of(1e-8) {
            return unit_basis(x.len())
                .into_iter()
                .map(|c| self.constant(c))
                .collect();
        }
        let inv = self.div(self.constant(F::one()), self.sqrt(sq));
        x.iter().map(|&xi| self.mul(xi, inv)).collect()
    }

    // ---- reverse sweep ----------------------------------------------------

    /// Adjoints of every node with respect to `output`.
    pub fn gradient(&self, output: Var) -> Gradients<F> {
        let n = self.nodes.borrow();
        let mut adj = vec![F::zero(); output.index() + 1];
        adj[output.index()] = F::one();
        for i in (0..=output.index()).rev() {
            let a = adj[i];
            if a == F::zero() {
                continue;
            }
            let (start, len) = n.spans[i];
            let (s, e) = (start as usize, (start + len) as usize);
            for (&p, &d) in n.parents[s..e].iter().zip(&n.partials[s..e]) {
                adj[p as usize] += a * d;
            }
        }
        Gradients { adj }
    }
}

/// `e_1` in `d` dimensions.
pub fn unit_basis<F: Scalar>(d: usize) -> Vec<F> {
    let mut v = vec![F::zero(); d];
    if d > 0 {
        v[0] = F::one();
    }
    v
}

/// Result of a reverse sweep.
pub struct Gradients<F> {
    adj: Vec<F>,
}

impl<F: Scalar> Gradients<F> {
    pub fn wrt(&self, v: Var) -> F {
        self.adj.get(v.index()).copied().unwrap_or_else(F::zero)
    }

    pub fn wrt_all(&self, vs: &[Var]) -> Vec<F> {
        vs.iter().map(|&v| self.wrt(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<G: Fn(&[f64]) -> f64>(f: G, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn product_rule() {
        let t = Tape::<f64>::new();
        let x = t.leaf(3.0);
        let y = t.leaf(-2.0);
        let z = t.mul(t.add(x, y), x);
        let g = t.gradient(z);
        assert_eq!(t.value(z), 3.0);
        assert_eq!(g.wrt(x), 2.0 * 3.0 - 2.0);
        assert_eq!(g.wrt(y), 3.0);
    }

    #[test]
    fn composite_matches_finite_difference() {
        let x0 = [0.3, -0.7, 1.1];
        let f = |x: &[f64]| {
            let t = Tape::<f64>::new();
            let v = t.leaves(x);
            let n = t.normalize(&v);
            let s = t.softmax(&n);
            let w = t.weighted_vectors(&[&n, &v, &v], &s);
            let out = t.add(t.log_sum_exp(&w), t.softplus(t.tanh(v[0])));
            (t, v, out)
        };
        let (t, v, out) = f(&x0);
        let g = t.gradient(out).wrt_all(&v);
        let num = fd(
            |x| {
                let (t, _, o) = f(x);
                t.value(o)
            },
            &x0,
        );
        for (a, b) in g.iter().zip(num) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn detach_blocks_gradient() {
        let t = Tape::<f64>::new();
        let x = t.leaf(2.0);
        let y = t.mul(t.detach(x), x);
        assert_eq!(t.gradient(y).wrt(x), 2.0);
    }

    #[test]
    fn normalize_guard_returns_basis() {
        let t = Tape::<f32>::new();
        let v = t.leaves(&[0.0, 0.0, 0.0]);
        assert_eq!(t.values(&t.normalize(&v)), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn softplus_is_stable() {
        let t = Tape::<f64>::new();
        let big = t.leaf(800.0);
        let s = t.softplus(big);
        assert_eq!(t.value(s), 800.0);
        assert_eq!(t.gradient(s).wrt(big), 1.0);
    }
}
