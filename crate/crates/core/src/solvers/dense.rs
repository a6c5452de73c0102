use crate::error::{Error, Result};
use crate::problem::{Node, Solution};
use crate::scalar::Scalar;

/// Two-point cubic Hermite interpolant on `[a.t, b.t]` using the stored
/// states and derivatives at both ends.
pub fn hermite<T: Scalar>(a: &Node<T>, b: &Node<T>, t: f64) -> Vec<T> {
    if t == a.t {
        return a.u.clone();
    }
    if t == b.t {
        return b.u.clone();
    }
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let s1 = 1.0 - s;
    let h00 = (1.0 + 2.0 * s) * s1 * s1;
    let h10 = s * s1 * s1 * h;
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0) * h;
    (0..a.u.len())
        .map(|i| a.u[i].clone() * h00 + a.f[i].clone() * h10 + b.u[i].clone() * h01 + b.f[i].clone() * h11)
        .collect()
}

/// Dense output over a node sequence.
pub fn dense_eval_nodes<T: Scalar>(nodes: &[Node<T>], t: f64) -> Result<Vec<T>> {
    let (lo, hi) = (nodes[0].t, nodes.last().unwrap().t);
    if !(t >= lo && t <= hi) {
        return Err(Error::OutOfRange { t, lo, hi });
    }
    let k = nodes.partition_point(|n| n.t < t);
    if k < nodes.len() && nodes[k].t == t {
        return Ok(nodes[k].u.clone());
    }
    Ok(hermite(&nodes[k - 1], &nodes[k], t))
}

/// State at any `t` in the solution span.
pub fn dense_eval<T: Scalar>(sol: &Solution<T>, t: f64) -> Result<Vec<T>> {
    dense_eval_nodes(&sol.nodes, t)
}
