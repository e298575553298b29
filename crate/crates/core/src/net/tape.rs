//! Reverse-mode automatic differentiation over dense 2-D arrays.
//!
//! A [`Tape`] records every operation in evaluation order; [`Tape::backward`]
//! walks it in reverse and accumulates the adjoint of each node.

use ndarray::{concatenate, s, Array2, Axis};

use super::gelu;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    /// Matrix plus a 1×n row broadcast over every row.
    AddRow(Var, Var),
    Sub(Var, Var),
    MatMul(Var, Var),
    Gelu(Var),
    Sin(Var),
    Cos(Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    /// Sum of squared entries, as a 1×1 array.
    SumSquares(Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node after a backward pass.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zero-shaped nodes that did not
    /// influence the output have no entry.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row needs a 1×n row");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::sin);
        self.push(v, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::cos);
        self.push(v, Op::Cos(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let flat: Vec<f64> = self.value(a).iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), flat).expect("reshape: size mismatch");
        self.push(v, Op::Reshape(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().map(|x| x * x).sum::<f64>();
        self.push(Array2::from_elem((1, 1), s), Op::SumSquares(a))
    }

    /// Backpropagates from the 1×1 node `out` (seed adjoint 1).
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(self.value(out).dim(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Array2::ones((1, 1)));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, -&g);
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Gelu(a) => {
                    let mut d = self.value(*a).mapv(gelu_derivative);
                    d *= &g;
                    accumulate(&mut grads, *a, d);
                }
                Op::Sin(a) => {
                    let mut d = self.value(*a).mapv(f64::cos);
                    d *= &g;
                    accumulate(&mut grads, *a, d);
                }
                Op::Cos(a) => {
                    let mut d = self.value(*a).mapv(|x| -x.sin());
                    d *= &g;
                    accumulate(&mut grads, *a, d);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, &g * *s),
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        accumulate(&mut grads, *p, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::Reshape(a) => {
                    let (r, c) = self.value(*a).dim();
                    let flat: Vec<f64> = g.iter().copied().collect();
                    accumulate(&mut grads, *a, Array2::from_shape_vec((r, c), flat).unwrap());
                }
                Op::SumSquares(a) => {
                    let scale = 2.0 * g[(0, 0)];
                    accumulate(&mut grads, *a, self.value(*a) * scale);
                }
            }
            // Leaves keep their adjoint for the caller.
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

/// d/dx [x Φ(x)] = Φ(x) + x φ(x).
pub fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng as _;

    type Build = fn(&mut Tape, Var, Var) -> Var;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::rng::substream(seed, 0);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.5..1.5))
    }

    /// Checks d(sum_squares(f(a, b)))/da and /db against central differences.
    fn check(build: Build, a: Array2<f64>, b: Array2<f64>) {
        let eval = |a: &Array2<f64>, b: &Array2<f64>| {
            let mut t = Tape::new();
            let (va, vb) = (t.leaf(a.clone()), t.leaf(b.clone()));
            let f = build(&mut t, va, vb);
            let out = t.sum_squares(f);
            t.value(out)[(0, 0)]
        };
        let mut t = Tape::new();
        let (va, vb) = (t.leaf(a.clone()), t.leaf(b.clone()));
        let f = build(&mut t, va, vb);
        let out = t.sum_squares(f);
        let grads = t.backward(out);
        let eps = 1e-5;
        for (which, base) in [(va, &a), (vb, &b)] {
            let g = grads.get(which).cloned().unwrap_or_else(|| Array2::zeros(base.dim()));
            for idx in 0..base.len() {
                let (r, c) = (idx / base.ncols(), idx % base.ncols());
                let (mut plus, mut minus) = (base.clone(), base.clone());
                plus[(r, c)] += eps;
                minus[(r, c)] -= eps;
                let (fp, fm) = if which == va {
                    (eval(&plus, &b), eval(&minus, &b))
                } else {
                    (eval(&a, &plus), eval(&a, &minus))
                };
                let fd = (fp - fm) / (2.0 * eps);
                let an = g[(r, c)];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(rel <= 1e-4, "entry ({r},{c}): analytic {an}, numeric {fd}");
            }
        }
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        check(|t, a, b| t.add(a, b), random(3, 4, 1), random(3, 4, 2));
        check(|t, a, b| t.sub(a, b), random(3, 4, 3), random(3, 4, 4));
        check(|t, a, b| t.add_row(a, b), random(5, 3, 5), random(1, 3, 6));
        check(|t, a, b| t.matmul(a, b), random(4, 3, 7), random(3, 2, 8));
        check(|t, a, b| { let s = t.add(a, b); t.gelu(s) }, random(3, 3, 9), random(3, 3, 10));
        check(|t, a, b| { let s = t.add(a, b); t.sin(s) }, random(2, 3, 11), random(2, 3, 12));
        check(|t, a, b| { let s = t.add(a, b); t.cos(s) }, random(2, 3, 13), random(2, 3, 14));
        check(|t, a, b| { let s = t.sub(a, b); t.scale(s, -2.5) }, random(2, 2, 15), random(2, 2, 16));
        check(|t, a, b| t.concat_cols(&[a, b, a]), random(3, 2, 17), random(3, 1, 18));
        check(|t, a, b| { let m = t.matmul(a, b); t.reshape(m, 2, 6) }, random(4, 2, 19), random(2, 3, 20));
    }

    #[test]
    fn reused_nodes_accumulate() {
        let mut t = Tape::new();
        let x = t.leaf(array![[3.0]]);
        let y = t.add(x, x);
        let out = t.sum_squares(y); // (2x)² → d/dx = 8x
        let g = t.backward(out);
        assert_eq!(g.get(x).unwrap()[(0, 0)], 24.0);
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for k in -60..=60 {
            let x = k as f64 / 10.0;
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_derivative(x)).abs() < 1e-8);
        }
    }
}
